use std::path::PathBuf;
use std::process::ExitCode;

use actnorm::mlp::InitScheme;
use actnorm_cli::dataset::DatasetKind;
use actnorm_cli::{execute, CliError, CliResult, ExperimentConfig, ExperimentKind};
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Static activation normalization experiments.
#[derive(Parser)]
#[command(name = "actnorm", version)]
struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output root (default: $ACTNORM_OUTPUT_ROOT, else ./runs).
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Coefficient table for every registered activation, with a reference diff.
    Table(Overrides),
    /// Coefficients, Hermite expansion and samples of one or more normalized activations.
    Normalize {
        activations: Vec<String>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Marcenko-Pastur checks against a sampled Wishart spectrum.
    MpCheck(Overrides),
    /// Train networks and write logs and checkpoints.
    Train(Overrides),
    /// Trainability as a function of depth.
    DepthSweep(Overrides),
    /// Per-layer W·Wᵀ spectra during training.
    Spectra(Overrides),
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Orthogonal,
    Gaussian,
}

#[derive(Args, Default)]
struct Overrides {
    /// Activation name (repeatable).
    #[arg(long = "activation")]
    activation: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    depths: Vec<usize>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long, value_enum)]
    init: Option<InitArg>,
    #[arg(long)]
    sigma_w: Option<f64>,
    #[arg(long)]
    sigma_x: Option<f64>,
    /// Learning rates, tried in order.
    #[arg(long = "lr", value_delimiter = ',')]
    learning_rates: Vec<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    #[arg(long)]
    stop_at_threshold: Option<bool>,
    #[arg(long, value_delimiter = ',')]
    spectra_epochs: Vec<usize>,
    #[arg(long)]
    matrix_size: Option<usize>,
    #[arg(long)]
    mp_shape: Option<f64>,
    #[arg(long, value_enum)]
    dataset: Option<DatasetArg>,
    #[arg(long)]
    data_path: Option<PathBuf>,
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    train_samples: Option<usize>,
    #[arg(long)]
    test_samples: Option<usize>,
    #[arg(long)]
    input_dim: Option<usize>,
    #[arg(long)]
    separation: Option<f64>,
    #[arg(long)]
    data_seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DatasetArg {
    SyntheticBlobs,
    Cifar10Binary,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn set_list<T>(slot: &mut Vec<T>, v: Vec<T>) {
    if !v.is_empty() {
        *slot = v;
    }
}

impl Overrides {
    fn apply(self, cfg: &mut ExperimentConfig) {
        set_list(&mut cfg.activations, self.activation);
        set_list(&mut cfg.depths, self.depths);
        set(&mut cfg.width, self.width);
        match self.init {
            Some(InitArg::Orthogonal) => cfg.init = InitScheme::Orthogonal,
            Some(InitArg::Gaussian) => {
                cfg.init = InitScheme::Gaussian {
                    sigma_w: self.sigma_w.unwrap_or(1.0),
                }
            }
            None => {}
        }
        set(&mut cfg.sigma_w, self.sigma_w);
        set(&mut cfg.sigma_x, self.sigma_x);
        set_list(&mut cfg.optimizer.learning_rates, self.learning_rates);
        set(&mut cfg.optimizer.momentum, self.momentum);
        set(&mut cfg.optimizer.batch_size, self.batch_size);
        if let Some(e) = self.epochs {
            if cfg.spectra_epochs.last() == Some(&cfg.epochs) && self.spectra_epochs.is_empty() {
                *cfg.spectra_epochs.last_mut().unwrap() = e;
            }
            cfg.epochs = e;
        }
        set_list(&mut cfg.seeds, self.seeds);
        set(&mut cfg.stop_at_threshold, self.stop_at_threshold);
        set_list(&mut cfg.spectra_epochs, self.spectra_epochs);
        set(&mut cfg.matrix_size, self.matrix_size);
        set(&mut cfg.mp_shape, self.mp_shape);
        let d = &mut cfg.dataset;
        match self.dataset {
            Some(DatasetArg::SyntheticBlobs) => d.kind = DatasetKind::SyntheticBlobs,
            Some(DatasetArg::Cifar10Binary) => {
                d.kind = DatasetKind::Cifar10Binary;
                d.input_dim = actnorm_cli::dataset::CIFAR_PIXELS;
            }
            None => {}
        }
        if self.data_path.is_some() {
            d.path = self.data_path;
        }
        set(&mut d.classes, self.classes);
        set(&mut d.train_samples, self.train_samples);
        set(&mut d.test_samples, self.test_samples);
        set(&mut d.input_dim, self.input_dim);
        set(&mut d.separation, self.separation);
        set(&mut d.seed, self.data_seed);
    }
}

fn build_config(cli: Cli) -> CliResult<ExperimentConfig> {
    let (kind, overrides) = match cli.command {
        Command::Table(o) => (ExperimentKind::Table, o),
        Command::Normalize {
            activations,
            mut overrides,
        } => {
            overrides.activation.extend(activations);
            (ExperimentKind::Normalize, overrides)
        }
        Command::MpCheck(o) => (ExperimentKind::MpCheck, o),
        Command::Train(o) => (ExperimentKind::Train, o),
        Command::DepthSweep(o) => (ExperimentKind::DepthSweep, o),
        Command::Spectra(o) => (ExperimentKind::Spectra, o),
    };
    let mut cfg = match &cli.config {
        Some(path) => {
            let cfg = ExperimentConfig::load(path)?;
            if cfg.kind != kind {
                return Err(CliError::config(
                    "kind",
                    format!("config file is for `{}`, command is `{}`", cfg.kind.as_str(), kind.as_str()),
                ));
            }
            cfg
        }
        None => ExperimentConfig::preset(kind),
    };
    overrides.apply(&mut cfg);
    if cli.output_dir.is_some() {
        cfg.output_dir = cli.output_dir;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = build_config(cli).and_then(|cfg| execute(&cfg));
    match result {
        Ok((run, summary)) => {
            println!("{summary}");
            println!("results: {}", run.path().display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

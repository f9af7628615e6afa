//! The six experiment kinds.

use std::io::Write;

use actnorm::activation;
use actnorm::hermite;
use actnorm::mlp::{self, checkpoint, Dataset, MlpModel, Sgd, TrainOptions, TrainState, TrainingLog};
use actnorm::normalizer::{self, NormalizationCoefficients, NormalizationContext};
use actnorm::reference::{self, COLUMNS};
use actnorm::spectral::{empirical_spectrum, moment_generating_function, mp_density, SpectrumSource, SpreadSummary};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::dataset::load_dataset;
use crate::error::{CliError, CliResult};
use crate::output::RunDir;

/// Agreement required between computed and published table cells.
pub const TABLE_TOLERANCE: f64 = 1e-4;

fn csv_err(run: &RunDir, rel: &str) -> impl Fn(std::io::Error) -> CliError {
    let p = run.path().join(rel);
    move |e| CliError::fs(p.clone(), e)
}

// ---------------------------------------------------------------- table

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub name: String,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub m2_squared: f64,
    pub m4: f64,
}

impl TableRow {
    pub fn values(&self) -> [f64; 5] {
        [self.alpha, self.beta, self.gamma, self.m2_squared, self.m4]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffCell {
    pub activation: String,
    pub column: String,
    pub computed: f64,
    pub reference: f64,
    pub abs_diff: f64,
    pub within_tolerance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableReport {
    pub rows: Vec<TableRow>,
    /// Published cells compared after exchanging the first two published columns.
    pub diffs: Vec<DiffCell>,
    pub tolerance: f64,
    pub mismatches: Vec<String>,
}

pub fn compute_table(cfg: &ExperimentConfig) -> CliResult<TableReport> {
    let ctx = NormalizationContext::new(cfg.sigma_w, cfg.sigma_x)?;
    let mut rows = Vec::new();
    for a in activation::all() {
        let c = normalizer::coefficients(&a, &ctx)?;
        rows.push(TableRow {
            name: a.name().to_string(),
            alpha: c.alpha,
            beta: c.beta,
            gamma: c.gamma,
            m2_squared: c.m2_squared(),
            m4: c.m4,
        });
    }
    let mut diffs = Vec::new();
    for r in &reference::REFERENCE_TABLE {
        let row = rows.iter().find(|x| x.name == r.name).expect("reference names are registered");
        for ((col, computed), published) in COLUMNS.iter().zip(row.values()).zip(r.as_swapped()) {
            let abs_diff = (computed - published).abs();
            diffs.push(DiffCell {
                activation: r.name.to_string(),
                column: col.to_string(),
                computed,
                reference: published,
                abs_diff,
                within_tolerance: abs_diff <= TABLE_TOLERANCE,
            });
        }
    }
    let mismatches = diffs
        .iter()
        .filter(|d| !d.within_tolerance)
        .map(|d| format!("{}.{}", d.activation, d.column))
        .collect();
    Ok(TableReport {
        rows,
        diffs,
        tolerance: TABLE_TOLERANCE,
        mismatches,
    })
}

/// Writes `coefficients.csv`, `reference_diff.csv` and `reference_diff.json`.
pub fn run_table(cfg: &ExperimentConfig, run: &RunDir) -> CliResult<TableReport> {
    let report = compute_table(cfg)?;
    run.write_with("coefficients.csv", |w| {
        writeln!(w, "name,alpha,beta,gamma,m2_squared,m4")?;
        for r in &report.rows {
            writeln!(w, "{},{},{},{},{},{}", r.name, r.alpha, r.beta, r.gamma, r.m2_squared, r.m4)?;
        }
        Ok(())
    })?;
    run.write_with("reference_diff.csv", |w| {
        writeln!(w, "activation,column,computed,reference,abs_diff,within_tolerance")?;
        for d in &report.diffs {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                d.activation, d.column, d.computed, d.reference, d.abs_diff, d.within_tolerance
            )?;
        }
        Ok(())
    })?;
    run.write_json("reference_diff.json", &report)?;
    Ok(report)
}

// ------------------------------------------------------------ normalize

/// Writes, per activation, `coefficients.json`, `hermite.csv` (normalized function)
/// and `samples.csv` on a 201-point grid over [−5, 5].
pub fn run_normalize(cfg: &ExperimentConfig, run: &RunDir) -> CliResult<Vec<NormalizationCoefficients>> {
    let ctx = NormalizationContext::new(cfg.sigma_w, cfg.sigma_x)?;
    let mut out = Vec::new();
    for name in &cfg.activations {
        let a = normalizer::resolve_activation(name)?;
        let c = normalizer::coefficients(&a, &ctx)?;
        let normalized = normalizer::normalize(&a, &c)?;
        let expansion = hermite::expand_auto(&normalized, hermite::DEFAULT_TRUNCATION)?;

        run.write_json(&format!("{name}/coefficients.json"), &c)?;
        let rel = format!("{name}/hermite.csv");
        expansion.write_csv(run.file(&rel)?).map_err(csv_err(run, &rel))?;
        run.write_with(&format!("{name}/samples.csv"), |w| {
            writeln!(w, "x,f,f_normalized")?;
            for i in 0..=200 {
                let x = -5.0 + 0.05 * i as f64;
                writeln!(w, "{x},{},{}", a.value(x), normalized.value(x))?;
            }
            Ok(())
        })?;
        out.push(c);
    }
    Ok(out)
}

// ------------------------------------------------------------- mp-check

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpReport {
    pub shape: f64,
    pub mass: f64,
    pub mean: f64,
    /// Largest `|φ z G² − (1 + (φ−1) z) G + 1|` over the probe points, `G(z) = Σ m_k z^k`.
    pub quadratic_max_residual: f64,
    pub quadratic_points: usize,
    pub matrix_size: usize,
    pub seed: u64,
    pub ks_distance: f64,
}

/// Probe points for the moment-generating quadratic, all with `1/z` off the support.
pub fn quadratic_probe_points() -> Vec<Complex64> {
    let inner = (0..10).map(|k| Complex64::from_polar(0.15, std::f64::consts::TAU * k as f64 / 10.0));
    let outer = (0..10).map(|k| Complex64::from_polar(1.5, std::f64::consts::TAU * (k as f64 + 0.5) / 10.0));
    inner.chain(outer).collect()
}

/// Wishart matrix `X·Xᵀ/m` with `X` of size `n × m`, `m = round(n/φ)`.
pub fn wishart(n: usize, shape: f64, seed: u64) -> DMatrix<f64> {
    let m = (n as f64 / shape).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, m, |_, _| -> f64 { StandardNormal.sample(&mut rng) });
    (&x * x.transpose()) / m as f64
}

/// Writes `density.csv`, `wishart_spectrum.csv` and `summary.json`.
pub fn run_mp_check(cfg: &ExperimentConfig, run: &RunDir) -> CliResult<MpReport> {
    let phi = cfg.mp_shape;
    let mp = mp_density(phi)?;
    let points = quadratic_probe_points();
    let mut worst: f64 = 0.0;
    for &z in &points {
        let g = moment_generating_function(&mp, z)?;
        let residual = phi * z * g * g - (1.0 + (phi - 1.0) * z) * g + 1.0;
        worst = worst.max(residual.norm());
    }
    let seed = cfg.seeds[0];
    let spectrum = empirical_spectrum(&wishart(cfg.matrix_size, phi, seed), SpectrumSource::role("wishart"))?;
    let report = MpReport {
        shape: phi,
        mass: mp.mass(),
        mean: mp.moment(1),
        quadratic_max_residual: worst,
        quadratic_points: points.len(),
        matrix_size: cfg.matrix_size,
        seed,
        ks_distance: spectrum.ks_distance(&mp),
    };
    let rel = "density.csv";
    mp.write_csv(run.file(rel)?, 401).map_err(csv_err(run, rel))?;
    let rel = "wishart_spectrum.csv";
    spectrum.write_csv(run.file(rel)?).map_err(csv_err(run, rel))?;
    run.write_json("summary.json", &report)?;
    Ok(report)
}

// ------------------------------------------------------------- training

/// One learning-rate attempt of a training arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub learning_rate: f64,
    pub best_accuracy: f64,
    pub epochs_run: usize,
    pub failed_at: Option<usize>,
}

/// Outcome of training one (activation, depth, seed) arm over the learning-rate grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmResult {
    pub activation: String,
    pub depth: usize,
    pub seed: u64,
    /// Rate of the first trainable attempt, else of the last attempt.
    pub learning_rate: f64,
    pub trainable: bool,
    pub epochs_to_threshold: Option<usize>,
    pub terminal_accuracy: f64,
    pub best_accuracy: f64,
    pub failed_at: Option<usize>,
    pub attempts: Vec<Attempt>,
}

/// Trained model, its log, and any layer-spectrum snapshots.
pub struct ArmRun {
    pub result: ArmResult,
    pub model: MlpModel,
    pub log: TrainingLog,
    pub snapshots: Vec<(usize, MlpModel)>,
}

fn arm_name(activation: &str, depth: usize, seed: u64) -> String {
    format!("{activation}-d{depth}-s{seed}")
}

/// Trains one arm, trying each configured learning rate until one reaches the threshold.
/// Snapshots of the model are kept at `snapshot_epochs` for the attempt that is reported.
pub fn train_arm(
    cfg: &ExperimentConfig,
    data: &Dataset,
    activation: &str,
    depth: usize,
    seed: u64,
    snapshot_epochs: &[usize],
) -> CliResult<ArmRun> {
    let threshold = cfg.threshold();
    let mut attempts = Vec::new();
    let mut last = None;
    for &lr in &cfg.optimizer.learning_rates {
        let model = MlpModel::init_named(depth, cfg.width, data.input_dim(), data.classes, activation, cfg.init, seed)?;
        let sgd = Sgd {
            learning_rate: lr,
            momentum: cfg.optimizer.momentum,
            batch_size: cfg.optimizer.batch_size,
        };
        let mut state = TrainState::new(model, sgd, seed)?;
        let mut snapshots = Vec::new();
        if snapshot_epochs.contains(&0) {
            snapshots.push((0, state.model.clone()));
        }
        let mut log = TrainingLog::default();
        for epoch in 1..=cfg.epochs {
            let step = mlp::train_with(
                &mut state,
                data,
                TrainOptions {
                    epochs: 1,
                    stop_at_test_accuracy: None,
                },
            );
            log.records.extend(step.records);
            if step.failed_at.is_some() {
                log.failed_at = step.failed_at;
                log.failure = step.failure;
                break;
            }
            if snapshot_epochs.contains(&epoch) {
                snapshots.push((epoch, state.model.clone()));
            }
            if cfg.stop_at_threshold && log.final_test_accuracy() >= threshold {
                break;
            }
        }
        let trainable = log.best_test_accuracy() >= threshold;
        attempts.push(Attempt {
            learning_rate: lr,
            best_accuracy: log.best_test_accuracy(),
            epochs_run: log.records.len(),
            failed_at: log.failed_at,
        });
        let result = ArmResult {
            activation: activation.to_string(),
            depth,
            seed,
            learning_rate: lr,
            trainable,
            epochs_to_threshold: log.epochs_to(threshold),
            terminal_accuracy: log.final_test_accuracy(),
            best_accuracy: log.best_test_accuracy(),
            failed_at: log.failed_at,
            attempts: Vec::new(),
        };
        last = Some(ArmRun {
            result,
            model: state.model,
            log,
            snapshots,
        });
        if trainable {
            break;
        }
    }
    let mut arm = last.expect("learning-rate grid is non-empty");
    arm.result.attempts = attempts;
    Ok(arm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub arm: ArmResult,
    pub log_file: String,
    pub checkpoint_file: String,
}

/// Trains every (activation, seed) at `depths[0]`. Writes a JSON-lines log and a
/// checkpoint per run plus `summary.json`.
pub fn run_train(cfg: &ExperimentConfig, run: &RunDir) -> CliResult<Vec<TrainSummary>> {
    let data = load_dataset(&cfg.dataset)?;
    let depth = cfg.depths[0];
    let mut out = Vec::new();
    for act in &cfg.activations {
        for &seed in &cfg.seeds {
            let arm = train_arm(cfg, &data, act, depth, seed, &[])?;
            let name = arm_name(act, depth, seed);
            let log_file = format!("logs/{name}.jsonl");
            arm.log.write_jsonl(run.file(&log_file)?).map_err(csv_err(run, &log_file))?;
            let checkpoint_file = format!("models/{name}.bin");
            checkpoint::save(&arm.model, run.file(&checkpoint_file)?)?;
            out.push(TrainSummary {
                arm: arm.result,
                log_file,
                checkpoint_file,
            });
        }
    }
    run.write_json("summary.json", &out)?;
    Ok(out)
}

// ---------------------------------------------------------- depth sweep

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthCell {
    pub activation: String,
    pub depth: usize,
    pub seeds: usize,
    pub trainable_seeds: usize,
    pub trainable_fraction: f64,
    /// At least `⌈(seeds+1)/2⌉` seeds trainable.
    pub majority_trainable: bool,
    pub median_epochs_to_threshold: Option<f64>,
    pub mean_terminal_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxDepth {
    pub activation: String,
    /// Deepest swept depth with a trainable majority.
    pub max_trainable_depth: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub threshold: f64,
    pub epochs: usize,
    pub width: usize,
    pub learning_rates: Vec<f64>,
    pub cells: Vec<DepthCell>,
    pub max_depths: Vec<MaxDepth>,
    pub arms: Vec<ArmResult>,
}

impl SweepReport {
    pub fn cell(&self, activation: &str, depth: usize) -> Option<&DepthCell> {
        self.cells.iter().find(|c| c.activation == activation && c.depth == depth)
    }

    pub fn max_trainable_depth(&self, activation: &str) -> Option<usize> {
        self.max_depths
            .iter()
            .find(|m| m.activation == activation)
            .and_then(|m| m.max_trainable_depth)
    }
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

pub fn majority(count: usize, total: usize) -> bool {
    2 * count > total
}

/// Trains every (activation, depth, seed) arm. Divergent runs are recorded, never fatal.
/// Writes a log per attempted arm and `depth_sweep.json`.
pub fn run_depth_sweep(cfg: &ExperimentConfig, run: &RunDir) -> CliResult<SweepReport> {
    let data = load_dataset(&cfg.dataset)?;
    let mut arms = Vec::new();
    let mut cells = Vec::new();
    let mut max_depths = Vec::new();
    for act in &cfg.activations {
        let mut deepest = None;
        for &depth in &cfg.depths {
            let mut results = Vec::new();
            for &seed in &cfg.seeds {
                let arm = train_arm(cfg, &data, act, depth, seed, &[])?;
                let rel = format!("logs/{}.jsonl", arm_name(act, depth, seed));
                arm.log.write_jsonl(run.file(&rel)?).map_err(csv_err(run, &rel))?;
                results.push(arm.result);
            }
            let trainable_seeds = results.iter().filter(|r| r.trainable).count();
            let cell = DepthCell {
                activation: act.clone(),
                depth,
                seeds: results.len(),
                trainable_seeds,
                trainable_fraction: trainable_seeds as f64 / results.len() as f64,
                majority_trainable: majority(trainable_seeds, results.len()),
                median_epochs_to_threshold: median(
                    results.iter().filter_map(|r| r.epochs_to_threshold.map(|e| e as f64)).collect(),
                ),
                mean_terminal_accuracy: results.iter().map(|r| r.terminal_accuracy).sum::<f64>() / results.len() as f64,
            };
            if cell.majority_trainable {
                deepest = Some(deepest.map_or(depth, |d: usize| d.max(depth)));
            }
            cells.push(cell);
            arms.extend(results);
        }
        max_depths.push(MaxDepth {
            activation: act.clone(),
            max_trainable_depth: deepest,
        });
    }
    let report = SweepReport {
        threshold: cfg.threshold(),
        epochs: cfg.epochs,
        width: cfg.width,
        learning_rates: cfg.optimizer.learning_rates.clone(),
        cells,
        max_depths,
        arms,
    };
    run.write_json("depth_sweep.json", &report)?;
    Ok(report)
}

// -------------------------------------------------------------- spectra

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSummary {
    pub activation: String,
    pub seed: u64,
    pub epoch: usize,
    pub layer: usize,
    pub spread: SpreadSummary,
}

/// Median over seeds of the spectrum spread of layer 2 and of the last layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatteningCheck {
    pub activation: String,
    pub epoch: usize,
    pub second_layer_std: f64,
    pub last_layer_std: f64,
    pub second_layer_iqr: f64,
    pub last_layer_iqr: f64,
    pub flattened: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectraReport {
    pub depth: usize,
    pub layers: Vec<LayerSummary>,
    pub flattening: Vec<FlatteningCheck>,
    pub arms: Vec<ArmResult>,
}

/// Trains every (activation, seed) at `depths[0]` and records `W·Wᵀ` spectra at
/// `spectra_epochs`. Writes one CSV per (activation, seed, epoch, layer) and `summary.json`.
pub fn run_spectra(cfg: &ExperimentConfig, run: &RunDir) -> CliResult<SpectraReport> {
    let data = load_dataset(&cfg.dataset)?;
    let depth = cfg.depths[0];
    let mut epochs = cfg.spectra_epochs.clone();
    epochs.sort_unstable();
    epochs.dedup();
    let mut layers = Vec::new();
    let mut arms = Vec::new();
    for act in &cfg.activations {
        for &seed in &cfg.seeds {
            let arm = train_arm(cfg, &data, act, depth, seed, &epochs)?;
            for (epoch, model) in &arm.snapshots {
                for s in mlp::layer_spectra(model, Some(*epoch))? {
                    let layer = s.source.layer.expect("layer spectra carry their layer");
                    let rel = format!("spectra/{act}-s{seed}-e{epoch}-l{layer}.csv");
                    s.write_csv(run.file(&rel)?).map_err(csv_err(run, &rel))?;
                    layers.push(LayerSummary {
                        activation: act.clone(),
                        seed,
                        epoch: *epoch,
                        layer,
                        spread: s.summary(),
                    });
                }
            }
            arms.push(arm.result);
        }
    }
    let mut flattening = Vec::new();
    if depth >= 2 {
        for act in &cfg.activations {
            for &epoch in &epochs {
                let pick = |layer: usize, f: fn(&SpreadSummary) -> f64| {
                    median(
                        layers
                            .iter()
                            .filter(|l| &l.activation == act && l.epoch == epoch && l.layer == layer)
                            .map(|l| f(&l.spread))
                            .collect(),
                    )
                };
                let (Some(second_std), Some(last_std)) = (pick(2, |s| s.std), pick(depth, |s| s.std)) else {
                    continue;
                };
                flattening.push(FlatteningCheck {
                    activation: act.clone(),
                    epoch,
                    second_layer_std: second_std,
                    last_layer_std: last_std,
                    second_layer_iqr: pick(2, |s| s.iqr).unwrap_or(f64::NAN),
                    last_layer_iqr: pick(depth, |s| s.iqr).unwrap_or(f64::NAN),
                    flattened: last_std <= second_std,
                });
            }
        }
    }
    let report = SpectraReport {
        depth,
        layers,
        flattening,
        arms,
    };
    run.write_json("summary.json", &report)?;
    Ok(report)
}

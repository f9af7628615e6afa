//! Experiment harness for `actnorm`: configuration, datasets, run directories and
//! the experiment drivers behind the `actnorm` binary.

pub mod config;
pub mod dataset;
pub mod error;
pub mod experiments;
pub mod output;

pub use config::{ExperimentConfig, ExperimentKind};
pub use error::{CliError, CliResult};
pub use output::RunDir;

/// Runs the experiment described by `cfg` in a fresh run directory and returns its path.
pub fn execute(cfg: &ExperimentConfig) -> CliResult<(RunDir, String)> {
    cfg.validate()?;
    let run = RunDir::create(cfg)?;
    let summary = match cfg.kind {
        ExperimentKind::Table => {
            let r = experiments::run_table(cfg, &run)?;
            if r.mismatches.is_empty() {
                "all reference cells within tolerance".to_string()
            } else {
                format!("{} reference cells outside tolerance: {}", r.mismatches.len(), r.mismatches.join(", "))
            }
        }
        ExperimentKind::Normalize => {
            let cs = experiments::run_normalize(cfg, &run)?;
            cs.iter()
                .map(|c| format!("{}: alpha={} beta={} gamma={}", c.activation, c.alpha, c.beta, c.gamma))
                .collect::<Vec<_>>()
                .join("\n")
        }
        ExperimentKind::MpCheck => {
            let r = experiments::run_mp_check(cfg, &run)?;
            format!(
                "mass={} mean={} quadratic_residual={:e} ks={}",
                r.mass, r.mean, r.quadratic_max_residual, r.ks_distance
            )
        }
        ExperimentKind::Train => {
            let runs = experiments::run_train(cfg, &run)?;
            runs.iter()
                .map(|t| {
                    format!(
                        "{} depth {} seed {}: final test accuracy {:.4}{}",
                        t.arm.activation,
                        t.arm.depth,
                        t.arm.seed,
                        t.arm.terminal_accuracy,
                        t.arm.failed_at.map_or(String::new(), |e| format!(" (failed at epoch {e})"))
                    )
                })
                .collect::<Vec<_>>()
                .join("\n")
        }
        ExperimentKind::DepthSweep => {
            let r = experiments::run_depth_sweep(cfg, &run)?;
            r.max_depths
                .iter()
                .map(|m| match m.max_trainable_depth {
                    Some(d) => format!("{}: max trainable depth {d}", m.activation),
                    None => format!("{}: no trainable depth", m.activation),
                })
                .collect::<Vec<_>>()
                .join("\n")
        }
        ExperimentKind::Spectra => {
            let r = experiments::run_spectra(cfg, &run)?;
            r.flattening
                .iter()
                .map(|f| {
                    format!(
                        "{} epoch {}: layer-2 std {:e}, last-layer std {:e}",
                        f.activation, f.epoch, f.second_layer_std, f.last_layer_std
                    )
                })
                .collect::<Vec<_>>()
                .join("\n")
        }
    };
    run.finish(cfg.kind.as_str())?;
    Ok((run, summary))
}

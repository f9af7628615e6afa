//! Experiment configuration in TOML.
//!
//! Precedence, lowest to highest: built-in defaults, the config file, command-line flags.

use std::path::{Path, PathBuf};

use actnorm::mlp::InitScheme;
use actnorm::normalizer;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{DatasetDescriptor, DatasetKind};
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Table,
    Normalize,
    MpCheck,
    Train,
    DepthSweep,
    Spectra,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Table => "table",
            ExperimentKind::Normalize => "normalize",
            ExperimentKind::MpCheck => "mp-check",
            ExperimentKind::Train => "train",
            ExperimentKind::DepthSweep => "depth-sweep",
            ExperimentKind::Spectra => "spectra",
        }
    }

    fn trains(self) -> bool {
        matches!(self, ExperimentKind::Train | ExperimentKind::DepthSweep | ExperimentKind::Spectra)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    /// Tried in order; a sweep arm counts as trainable if any rate reaches the threshold.
    pub learning_rates: Vec<f64>,
    pub momentum: f64,
    pub batch_size: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            learning_rates: vec![0.01],
            momentum: 0.0,
            batch_size: 128,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub activations: Vec<String>,
    #[serde(default = "default_depths")]
    pub depths: Vec<usize>,
    #[serde(default = "default_width")]
    pub width: usize,
    #[serde(default = "default_init")]
    pub init: InitScheme,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default)]
    pub dataset: DatasetDescriptor,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Test accuracy counts as trainable at `trainable_factor × chance`.
    #[serde(default = "default_factor")]
    pub trainable_factor: f64,
    /// End a run as soon as the trainable threshold is reached.
    #[serde(default)]
    pub stop_at_threshold: bool,
    /// Epochs at which layer spectra are recorded (0 is initialization).
    #[serde(default)]
    pub spectra_epochs: Vec<usize>,
    #[serde(default = "one")]
    pub sigma_w: f64,
    #[serde(default = "one")]
    pub sigma_x: f64,
    /// Side length of the Wishart matrix in `mp-check`.
    #[serde(default = "default_matrix_size")]
    pub matrix_size: usize,
    #[serde(default = "one")]
    pub mp_shape: f64,
    /// Not part of the run identity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn default_depths() -> Vec<usize> {
    vec![5]
}
fn default_width() -> usize {
    128
}
fn default_init() -> InitScheme {
    InitScheme::Orthogonal
}
fn default_epochs() -> usize {
    30
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_factor() -> f64 {
    2.0
}
fn default_matrix_size() -> usize {
    512
}
fn one() -> f64 {
    1.0
}

impl ExperimentConfig {
    /// Built-in defaults for `kind`.
    pub fn preset(kind: ExperimentKind) -> Self {
        let mut cfg = ExperimentConfig {
            kind,
            activations: Vec::new(),
            depths: default_depths(),
            width: default_width(),
            init: default_init(),
            optimizer: OptimizerConfig::default(),
            epochs: default_epochs(),
            dataset: DatasetDescriptor::default(),
            seeds: default_seeds(),
            trainable_factor: default_factor(),
            stop_at_threshold: false,
            spectra_epochs: Vec::new(),
            sigma_w: 1.0,
            sigma_x: 1.0,
            matrix_size: default_matrix_size(),
            mp_shape: 1.0,
            output_dir: None,
        };
        match kind {
            ExperimentKind::DepthSweep => {
                cfg.activations = ["relu", "tilted_relu", "abs", "tanh"].map(String::from).to_vec();
                cfg.depths = vec![5, 10, 15, 20, 25];
                cfg.seeds = (0..5).collect();
                cfg.optimizer.learning_rates = vec![0.01, 0.003, 0.03];
                cfg.stop_at_threshold = true;
            }
            ExperimentKind::Train => cfg.activations = vec!["tilted_relu".into()],
            ExperimentKind::Spectra => {
                cfg.activations = vec!["tilted_relu".into()];
                cfg.spectra_epochs = vec![0, cfg.epochs];
            }
            ExperimentKind::Normalize => cfg.activations = vec!["relu".into()],
            ExperimentKind::Table | ExperimentKind::MpCheck => {}
        }
        cfg
    }

    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::fs(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// Hex SHA-256 of the serialized config without `output_dir`.
    pub fn hash(&self) -> String {
        let mut identity = self.clone();
        identity.output_dir = None;
        let digest = Sha256::digest(identity.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Checks every field before any compute. The error names the offending field.
    pub fn validate(&self) -> CliResult<()> {
        for (i, name) in self.activations.iter().enumerate() {
            normalizer::resolve_activation(name)
                .map_err(|e| CliError::config(format!("activations[{i}]"), e.to_string()))?;
        }
        let needs_activation = matches!(
            self.kind,
            ExperimentKind::Normalize | ExperimentKind::Train | ExperimentKind::DepthSweep | ExperimentKind::Spectra
        );
        if needs_activation && self.activations.is_empty() {
            return Err(CliError::config("activations", "at least one activation is required"));
        }
        if self.depths.is_empty() {
            return Err(CliError::config("depths", "must not be empty"));
        }
        if let Some(i) = self.depths.iter().position(|&d| d == 0) {
            return Err(CliError::config(format!("depths[{i}]"), "depth must be positive"));
        }
        if self.width < 2 {
            return Err(CliError::config("width", format!("must be >= 2, got {}", self.width)));
        }
        if let InitScheme::Gaussian { sigma_w } = self.init {
            if !(sigma_w.is_finite() && sigma_w > 0.0) {
                return Err(CliError::config("init.sigma_w", format!("must be positive, got {sigma_w}")));
            }
        }
        let opt = &self.optimizer;
        if opt.learning_rates.is_empty() {
            return Err(CliError::config("optimizer.learning_rates", "must not be empty"));
        }
        if let Some(lr) = opt.learning_rates.iter().find(|lr| !(lr.is_finite() && **lr > 0.0)) {
            return Err(CliError::config("optimizer.learning_rates", format!("must be positive, got {lr}")));
        }
        if !(0.0..1.0).contains(&opt.momentum) {
            return Err(CliError::config("optimizer.momentum", format!("must lie in [0, 1), got {}", opt.momentum)));
        }
        if opt.batch_size == 0 {
            return Err(CliError::config("optimizer.batch_size", "must be positive"));
        }
        if self.kind.trains() && self.epochs == 0 {
            return Err(CliError::config("epochs", "must be positive"));
        }
        if self.seeds.is_empty() {
            return Err(CliError::config("seeds", "must not be empty"));
        }
        if self.kind == ExperimentKind::DepthSweep && self.seeds.len() < 3 {
            return Err(CliError::config("seeds", "a depth sweep needs at least 3 seeds"));
        }
        if !(self.trainable_factor.is_finite() && self.trainable_factor > 0.0) {
            return Err(CliError::config("trainable_factor", "must be positive"));
        }
        if let Some(&e) = self.spectra_epochs.iter().find(|&&e| e > self.epochs) {
            return Err(CliError::config("spectra_epochs", format!("epoch {e} exceeds epochs = {}", self.epochs)));
        }
        for (field, v) in [("sigma_w", self.sigma_w), ("sigma_x", self.sigma_x)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(CliError::config(field, format!("must be positive, got {v}")));
            }
        }
        if self.matrix_size < 2 {
            return Err(CliError::config("matrix_size", "must be >= 2"));
        }
        if !(self.mp_shape > 0.0 && self.mp_shape <= 1.0) {
            return Err(CliError::config("mp_shape", format!("must lie in (0, 1], got {}", self.mp_shape)));
        }
        self.dataset.validate()?;
        if self.kind.trains() && self.dataset.kind == DatasetKind::Cifar10Binary && self.dataset.classes != 10 {
            return Err(CliError::config("dataset.classes", "cifar10-binary has 10 classes"));
        }
        Ok(())
    }

    /// Trainability threshold on test accuracy.
    pub fn threshold(&self) -> f64 {
        self.trainable_factor / self.dataset.classes as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_round_trip() {
        for kind in [
            ExperimentKind::Table,
            ExperimentKind::Normalize,
            ExperimentKind::MpCheck,
            ExperimentKind::Train,
            ExperimentKind::DepthSweep,
            ExperimentKind::Spectra,
        ] {
            let cfg = ExperimentConfig::preset(kind);
            cfg.validate().unwrap();
            let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
            assert_eq!(back, cfg);
        }
    }

    #[test]
    fn minimal_file_gets_defaults() {
        let cfg = ExperimentConfig::from_toml("kind = \"table\"\n").unwrap();
        assert_eq!(cfg.width, 128);
        assert_eq!(cfg.epochs, 30);
        assert_eq!(cfg.init, InitScheme::Orthogonal);
    }

    #[test]
    fn hash_ignores_output_dir() {
        let a = ExperimentConfig::preset(ExperimentKind::Train);
        let mut b = a.clone();
        b.output_dir = Some("/tmp/elsewhere".into());
        assert_eq!(a.hash(), b.hash());
        b.width = 64;
        assert_ne!(a.hash(), b.hash());
    }
}

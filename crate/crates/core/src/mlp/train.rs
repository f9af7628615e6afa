use std::io::{self, Write};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{argmax_columns, Gradients, MlpModel};
use crate::error::{Error, Result};

/// Column-major labelled data split into train and test parts.
#[derive(Debug, Clone)]
pub struct Dataset {
    /// `input_dim × n_train`
    pub train_x: DMatrix<f64>,
    pub train_y: Vec<usize>,
    /// `input_dim × n_test`
    pub test_x: DMatrix<f64>,
    pub test_y: Vec<usize>,
    pub classes: usize,
}

impl Dataset {
    pub fn new(
        train_x: DMatrix<f64>,
        train_y: Vec<usize>,
        test_x: DMatrix<f64>,
        test_y: Vec<usize>,
        classes: usize,
    ) -> Result<Self> {
        if train_x.ncols() != train_y.len() || test_x.ncols() != test_y.len() {
            return Err(Error::invalid("sample and label counts differ"));
        }
        if train_x.nrows() != test_x.nrows() {
            return Err(Error::invalid("train and test feature dimensions differ"));
        }
        if train_y.is_empty() || test_y.is_empty() {
            return Err(Error::invalid("dataset needs non-empty train and test splits"));
        }
        if let Some(bad) = train_y.iter().chain(&test_y).find(|&&y| y >= classes) {
            return Err(Error::invalid(format!("label {bad} out of range for {classes} classes")));
        }
        Ok(Dataset {
            train_x,
            train_y,
            test_x,
            test_y,
            classes,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.train_x.nrows()
    }

    pub fn chance_accuracy(&self) -> f64 {
        1.0 / self.classes as f64
    }
}

/// Plain stochastic gradient descent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sgd {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
}

impl Default for Sgd {
    fn default() -> Self {
        Sgd {
            learning_rate: 0.01,
            momentum: 0.0,
            batch_size: 128,
        }
    }
}

/// A model plus everything that determines its training trajectory.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub model: MlpModel,
    pub optimizer: Sgd,
    pub epoch: usize,
    pub seed: u64,
    rng: ChaCha8Rng,
    velocity: Option<Gradients>,
}

impl TrainState {
    pub fn new(model: MlpModel, optimizer: Sgd, seed: u64) -> Result<Self> {
        if !(optimizer.learning_rate.is_finite() && optimizer.learning_rate > 0.0) {
            return Err(Error::invalid(format!(
                "learning rate must be positive, got {}",
                optimizer.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&optimizer.momentum) {
            return Err(Error::invalid(format!("momentum must lie in [0, 1), got {}", optimizer.momentum)));
        }
        if optimizer.batch_size == 0 {
            return Err(Error::invalid("batch size must be positive"));
        }
        Ok(TrainState {
            model,
            optimizer,
            epoch: 0,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed_5eed_5eed),
            velocity: None,
        })
    }
}

/// One line of the training log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub train_acc: f64,
    pub test_acc: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub records: Vec<EpochRecord>,
    /// Epoch (1-based) at which training diverged.
    pub failed_at: Option<usize>,
    pub failure: Option<String>,
}

impl TrainingLog {
    pub fn failed(&self) -> bool {
        self.failed_at.is_some()
    }

    pub fn best_test_accuracy(&self) -> f64 {
        self.records.iter().map(|r| r.test_acc).fold(0.0, f64::max)
    }

    pub fn final_test_accuracy(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.test_acc)
    }

    /// First epoch whose test accuracy reached `threshold`.
    pub fn epochs_to(&self, threshold: f64) -> Option<usize> {
        self.records.iter().find(|r| r.test_acc >= threshold).map(|r| r.epoch)
    }

    /// One JSON object per epoch, then a failure line if training diverged.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            writeln!(out)?;
        }
        if let Some(e) = self.failed_at {
            let line = serde_json::json!({
                "failed_at_epoch": e,
                "detail": self.failure.as_deref().unwrap_or(""),
            });
            serde_json::to_writer(&mut out, &line)?;
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Stopping rules for [`train_with`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TrainOptions {
    pub epochs: usize,
    /// Stop once test accuracy reaches this value.
    pub stop_at_test_accuracy: Option<f64>,
}

pub fn accuracy(model: &MlpModel, x: &DMatrix<f64>, y: &[usize]) -> Result<f64> {
    let predicted = model.predict(x)?;
    let hits = predicted.iter().zip(y).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / y.len() as f64)
}

fn gather_columns(x: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(x.nrows(), idx.len());
    for (j, &i) in idx.iter().enumerate() {
        out.set_column(j, &x.column(i));
    }
    out
}

fn run_epoch(state: &mut TrainState, data: &Dataset) -> Result<(f64, f64)> {
    let n = data.train_y.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut state.rng);

    let (mut loss_sum, mut hits) = (0.0, 0usize);
    let Sgd {
        learning_rate,
        momentum,
        batch_size,
    } = state.optimizer;
    for chunk in order.chunks(batch_size) {
        let xb = gather_columns(&data.train_x, chunk);
        let yb: Vec<usize> = chunk.iter().map(|&i| data.train_y[i]).collect();
        let cache = state.model.forward(&xb)?;
        hits += argmax_columns(&cache.logits).iter().zip(&yb).filter(|(p, t)| p == t).count();
        let (grads, loss) = state.model.backward(&cache, &yb)?;
        if !loss.is_finite() {
            return Err(Error::Divergence {
                layer: state.model.depth() + 1,
                detail: format!("non-finite loss ({loss})"),
            });
        }
        loss_sum += loss * chunk.len() as f64;
        if momentum > 0.0 {
            let v = state.velocity.get_or_insert_with(|| Gradients::zeros_like(&state.model));
            v.accumulate(momentum, &grads);
            state.model.apply_update(v, learning_rate);
        } else {
            state.model.apply_update(&grads, learning_rate);
        }
    }
    Ok((loss_sum / n as f64, hits as f64 / n as f64))
}

/// Trains for `epochs` epochs. Divergence stops training and marks the log.
pub fn train(state: &mut TrainState, data: &Dataset, epochs: usize) -> TrainingLog {
    train_with(
        state,
        data,
        TrainOptions {
            epochs,
            stop_at_test_accuracy: None,
        },
    )
}

pub fn train_with(state: &mut TrainState, data: &Dataset, options: TrainOptions) -> TrainingLog {
    let mut log = TrainingLog::default();
    for _ in 0..options.epochs {
        let epoch = state.epoch + 1;
        let outcome = run_epoch(state, data)
            .and_then(|(loss, train_acc)| Ok((loss, train_acc, accuracy(&state.model, &data.test_x, &data.test_y)?)));
        state.epoch = epoch;
        match outcome {
            Ok((loss, train_acc, test_acc)) => {
                log.records.push(EpochRecord {
                    epoch,
                    loss,
                    train_acc,
                    test_acc,
                });
                if options.stop_at_test_accuracy.is_some_and(|t| test_acc >= t) {
                    break;
                }
            }
            Err(e) => {
                log.failed_at = Some(epoch);
                log.failure = Some(e.to_string());
                break;
            }
        }
    }
    log
}

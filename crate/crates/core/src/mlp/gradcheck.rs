use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::model::{ForwardCache, MlpModel};
use crate::error::{Error, Result};

/// Finite-difference step. The five-point stencil has `O(h⁴)` truncation error.
pub const STEP: f64 = 1e-3;

/// Result of comparing backpropagated gradients with finite differences.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheck {
    pub checked: usize,
    /// Draws rejected because the stencil straddled a kink of the activation.
    pub skipped_near_kinks: usize,
    pub max_relative_error: f64,
    /// `(parameter index, backprop, finite difference)` of the worst parameter.
    pub worst: Option<(usize, f64, f64)>,
}

/// Gradients smaller than this are compared absolutely, since a parameter that
/// feeds only inactive units has an exact zero gradient and a finite difference
/// of pure rounding noise.
pub const ABSOLUTE_FLOOR: f64 = 1e-8;

/// `|a − b| / max(|a|, |b|, ABSOLUTE_FLOOR)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(ABSOLUTE_FLOOR)
}

fn perturbed(model: &MlpModel, index: usize, delta: f64) -> MlpModel {
    let mut m = model.clone();
    *m.parameters_mut().nth(index).expect("index within parameter count") += delta;
    m
}

fn kink_pattern(cache: &ForwardCache, kinks: &[f64]) -> Vec<bool> {
    cache
        .pre_activations
        .iter()
        .flat_map(|h| h.iter())
        .flat_map(|&v| kinks.iter().map(move |&k| v > k))
        .collect()
}

/// Checks `samples` randomly drawn parameters. Draws whose stencil crosses an
/// activation kink are redrawn, so the comparison only uses points where the
/// loss is smooth along the perturbed coordinate.
pub fn check_gradients(
    model: &MlpModel,
    batch: &DMatrix<f64>,
    labels: &[usize],
    samples: usize,
    seed: u64,
) -> Result<GradientCheck> {
    let (grads, _) = model.loss_and_gradients(batch, labels)?;
    let analytic: Vec<f64> = grads.values().copied().collect();
    let kinks = model.activation.kinks().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut report = GradientCheck {
        checked: 0,
        skipped_near_kinks: 0,
        max_relative_error: 0.0,
        worst: None,
    };
    let max_draws = 100 * samples.max(1);
    let mut draws = 0;
    while report.checked < samples {
        draws += 1;
        if draws > max_draws {
            return Err(Error::invalid("too many parameter draws straddle a kink"));
        }
        let idx = rng.random_range(0..analytic.len());
        let loss_at = |delta: f64| -> Result<(f64, ForwardCache)> {
            let m = perturbed(model, idx, delta);
            let cache = m.forward(batch)?;
            let (_, loss) = m.backward(&cache, labels)?;
            Ok((loss, cache))
        };
        let (lm2, cm2) = loss_at(-2.0 * STEP)?;
        let (lp2, cp2) = loss_at(2.0 * STEP)?;
        if !kinks.is_empty() && kink_pattern(&cm2, &kinks) != kink_pattern(&cp2, &kinks) {
            report.skipped_near_kinks += 1;
            continue;
        }
        let (lm1, _) = loss_at(-STEP)?;
        let (lp1, _) = loss_at(STEP)?;
        let fd = (-lp2 + 8.0 * lp1 - 8.0 * lm1 + lm2) / (12.0 * STEP);
        let err = relative_error(analytic[idx], fd);
        if err >= report.max_relative_error {
            report.max_relative_error = err;
            report.worst = Some((idx, analytic[idx], fd));
        }
        report.checked += 1;
    }
    Ok(report)
}

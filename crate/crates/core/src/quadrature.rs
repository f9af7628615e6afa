//! Integration against the standard Gaussian measure `Dz = exp(-z²/2)/√(2π) dz`.
//!
//! Two rule families are provided, both stored as plain node/weight lists so
//! that [`integrate`] is always the weighted sum `Σ wᵢ f(xᵢ)`:
//!
//! * Gauss–Hermite rules for the probabilists' weight, exact for polynomials of
//!   degree `2·order − 1`. These converge spectrally for smooth integrands.
//! * A composite rule over `[-12, 12]` split at caller-supplied breakpoints.
//!   Each piece is integrated by the trapezoid rule with one Richardson step
//!   (Simpson weights), and breakpoints are sampled one ulp to either side so
//!   that jumps in the integrand or its derivative fall exactly on piece
//!   boundaries. Gauss–Hermite rules only converge like `order^{-3/2}` on a
//!   kink, which is far too slow for ReLU-like activations.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Smallest supported Gauss–Hermite order.
pub const MIN_ORDER: usize = 2;
/// Largest supported Gauss–Hermite order.
pub const MAX_ORDER: usize = 512;
/// Default Gauss–Hermite order for smooth integrands.
pub const DEFAULT_ORDER: usize = 256;
/// Half-width of the truncated domain used by the composite rule.
pub const TRUNCATION: f64 = 12.0;
/// Default number of panels of the composite rule across the whole domain.
pub const DEFAULT_PANELS: usize = 1 << 14;

/// How a [`QuadratureRule`] was constructed.
#[derive(Debug, Clone, PartialEq)]
pub enum RuleKind {
    GaussHermite,
    CompositeTrapezoid { breakpoints: Vec<f64> },
}

/// A node/weight list for the standard Gaussian measure.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    order: usize,
    kind: RuleKind,
}

impl QuadratureRule {
    /// Abscissae, strictly increasing.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Non-negative weights; they sum to one. At very high Gauss–Hermite orders
    /// the outermost weights fall below the smallest positive `f64` and are zero.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Number of Gauss–Hermite nodes, or number of panels for the composite rule.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn kind(&self) -> &RuleKind {
        &self.kind
    }

    pub fn is_gauss_hermite(&self) -> bool {
        matches!(self.kind, RuleKind::GaussHermite)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `Σ wᵢ f(xᵢ)`; shorthand for [`integrate`].
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> Result<f64> {
        integrate(self, f)
    }
}

/// Builds the Gauss–Hermite rule with `order` nodes for the unit-variance
/// Gaussian measure.
///
/// Initial nodes come from the eigenvalues of the Jacobi matrix of the
/// orthonormal Hermite recurrence and are then polished by Newton iteration.
pub fn build_rule(order: usize) -> Result<QuadratureRule> {
    if !(MIN_ORDER..=MAX_ORDER).contains(&order) {
        return Err(Error::invalid(format!(
            "quadrature order {order} outside [{MIN_ORDER}, {MAX_ORDER}]"
        )));
    }

    let jacobi = DMatrix::<f64>::from_fn(order, order, |i, j| {
        if i + 1 == j {
            (j as f64).sqrt()
        } else if j + 1 == i {
            (i as f64).sqrt()
        } else {
            0.0
        }
    });
    let mut guesses: Vec<f64> = jacobi.symmetric_eigenvalues().iter().copied().collect();
    guesses.sort_by(|a, b| a.total_cmp(b));

    // The rule is symmetric: polish the non-negative half and mirror it.
    let half = order / 2;
    let mut positive = Vec::with_capacity(half);
    for &guess in &guesses[order - half..] {
        let mut x = guess;
        for _ in 0..100 {
            let eval = OrthonormalEval::at(order, x);
            let step = eval.newton_step();
            x -= step;
            if step.abs() <= 1e-15 * x.abs().max(1.0) {
                break;
            }
        }
        positive.push(x);
    }

    let mut nodes = Vec::with_capacity(order);
    nodes.extend(positive.iter().rev().map(|x| -x));
    if order % 2 == 1 {
        nodes.push(0.0);
    }
    nodes.extend(positive.iter().copied());

    let mut weights: Vec<f64> = nodes
        .iter()
        .map(|&x| OrthonormalEval::at(order, x).christoffel_weight())
        .collect();
    // Newton leaves relative errors of order 1e-16 in each weight; renormalizing
    // keeps the total mass exact.
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);

    Ok(QuadratureRule {
        nodes,
        weights,
        order,
        kind: RuleKind::GaussHermite,
    })
}

/// Builds the composite rule over `[-12, 12]` with pieces split at `breakpoints`.
///
/// Breakpoints outside the open domain are ignored. `panels` is distributed
/// across the pieces in proportion to their length (at least two per piece).
pub fn composite_trapezoid(breakpoints: &[f64], panels: usize) -> Result<QuadratureRule> {
    if panels < 2 {
        return Err(Error::invalid(format!("composite rule needs >= 2 panels, got {panels}")));
    }
    if let Some(bad) = breakpoints.iter().find(|b| !b.is_finite()) {
        return Err(Error::invalid(format!("non-finite breakpoint {bad}")));
    }
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|b| b.abs() < TRUNCATION)
        .collect();
    cuts.sort_by(|a, b| a.total_cmp(b));
    cuts.dedup();

    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(-TRUNCATION);
    edges.extend(cuts.iter().copied());
    edges.push(TRUNCATION);

    let density = |x: f64| (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    let last_piece = edges.len() - 2;
    for (piece, pair) in edges.windows(2).enumerate() {
        let (a, b) = (pair[0], pair[1]);
        let share = ((panels as f64) * (b - a) / (2.0 * TRUNCATION)).round() as usize;
        let m = (share.max(2) + 1) & !1;
        let h = (b - a) / m as f64;
        for i in 0..=m {
            let mut x = a + h * i as f64;
            if i == 0 && piece > 0 {
                x = a.next_up();
            }
            if i == m {
                x = if piece < last_piece { b.next_down() } else { b };
            }
            let simpson = if i == 0 || i == m {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            nodes.push(x);
            weights.push(simpson * h / 3.0 * density(x));
        }
    }

    Ok(QuadratureRule {
        nodes,
        weights,
        order: panels,
        kind: RuleKind::CompositeTrapezoid { breakpoints: cuts },
    })
}

/// Picks the Gauss–Hermite rule of `order` for smooth integrands and the
/// composite rule split at `kinks` otherwise.
pub fn select_rule(order: usize, kinks: &[f64]) -> Result<Arc<QuadratureRule>> {
    if kinks.is_empty() {
        cached_rule(order)
    } else {
        Ok(Arc::new(composite_trapezoid(kinks, DEFAULT_PANELS)?))
    }
}

/// Process-wide cache of Gauss–Hermite rules keyed by order.
pub fn cached_rule(order: usize) -> Result<Arc<QuadratureRule>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<QuadratureRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = cache.lock().expect("rule cache poisoned").get(&order) {
        return Ok(Arc::clone(rule));
    }
    let rule = Arc::new(build_rule(order)?);
    cache
        .lock()
        .expect("rule cache poisoned")
        .entry(order)
        .or_insert_with(|| Arc::clone(&rule));
    Ok(rule)
}

/// Weighted sum `Σ wᵢ f(xᵢ)` over the rule.
pub fn integrate<F: Fn(f64) -> f64>(rule: &QuadratureRule, f: F) -> Result<f64> {
    let mut acc = 0.0;
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        let y = f(x);
        if !y.is_finite() {
            return Err(Error::non_finite(format!("quadrature node x = {x:e}"), y));
        }
        acc += w * y;
    }
    Ok(acc)
}

/// Orthonormal Hermite values `p_{n-1}(x)`, `p_n(x)` with a running power-of-two
/// scale so high orders do not overflow.
struct OrthonormalEval {
    n: usize,
    prev: f64,
    last: f64,
    log_scale: f64,
}

impl OrthonormalEval {
    const RESCALE_AT: f64 = 1e150;

    fn at(n: usize, x: f64) -> Self {
        let mut prev = 0.0;
        let mut last = 1.0;
        let mut log_scale = 0.0;
        for k in 0..n {
            let next = (x * last - (k as f64).sqrt() * prev) / ((k + 1) as f64).sqrt();
            prev = last;
            last = next;
            if last.abs() > Self::RESCALE_AT {
                prev /= Self::RESCALE_AT;
                last /= Self::RESCALE_AT;
                log_scale += Self::RESCALE_AT.ln();
            }
        }
        OrthonormalEval {
            n,
            prev,
            last,
            log_scale,
        }
    }

    /// `p_n / p_n'` using `p_n' = √n · p_{n-1}`.
    fn newton_step(&self) -> f64 {
        self.last / ((self.n as f64).sqrt() * self.prev)
    }

    /// Christoffel weight `1 / (n · p_{n-1}(x)²)`.
    fn christoffel_weight(&self) -> f64 {
        let log_w = -(self.n as f64).ln() - 2.0 * (self.prev.abs().ln() + self.log_scale);
        log_w.exp()
    }
}

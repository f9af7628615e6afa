//! Static activation normalization.
//!
//! For an activation `f` and input scale `σ = σ_w·σ_x` the normalizer computes
//!
//! * `α = ∫ f′(σz) Dz` (slope removed),
//! * `β = ∫ f(σz) Dz` (mean removed),
//! * `γ = √∫ (f(σz) − α·σz − β)² Dz` (residual norm),
//!
//! and produces `f_H(x) = (f(x) − αx − β)/γ`, whose Gaussian mean gradient is zero
//! and whose Gaussian second moment is one.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use serde::{Deserialize, Serialize};

use crate::activation::{self, Activation};
use crate::error::{Error, Result};
use crate::quadrature::{self, QuadratureRule, RuleKind};

/// Name prefix that [`resolve_activation`] maps to the normalized variant.
pub const NORMALIZED_PREFIX: &str = "normalized_";
/// Largest tolerated disagreement between the primary and the check rule.
pub const DISCREPANCY_TOLERANCE: f64 = 1e-6;

/// Weight and input scales under which coefficients are computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationContext {
    sigma_w: f64,
    sigma_x: f64,
    q_star: f64,
}

impl Default for NormalizationContext {
    fn default() -> Self {
        NormalizationContext {
            sigma_w: 1.0,
            sigma_x: 1.0,
            q_star: 1.0,
        }
    }
}

impl NormalizationContext {
    /// Context with `q* = σ_w²·σ_x²`.
    pub fn new(sigma_w: f64, sigma_x: f64) -> Result<Self> {
        Self::with_q_star(sigma_w, sigma_x, (sigma_w * sigma_x).powi(2))
    }

    pub fn with_q_star(sigma_w: f64, sigma_x: f64, q_star: f64) -> Result<Self> {
        for (name, v) in [("sigma_w", sigma_w), ("sigma_x", sigma_x), ("q_star", q_star)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(NormalizationContext {
            sigma_w,
            sigma_x,
            q_star,
        })
    }

    pub fn sigma_w(&self) -> f64 {
        self.sigma_w
    }

    pub fn sigma_x(&self) -> f64 {
        self.sigma_x
    }

    pub fn q_star(&self) -> f64 {
        self.q_star
    }

    /// Argument dilation `σ_w·σ_x`.
    pub fn scale(&self) -> f64 {
        self.sigma_w * self.sigma_x
    }

    fn key(&self) -> [u64; 3] {
        [self.sigma_w.to_bits(), self.sigma_x.to_bits(), self.q_star.to_bits()]
    }
}

/// Outcome of cross-checking the coefficient integrals with a second rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureCheck {
    pub primary: String,
    pub check: String,
    pub max_discrepancy: f64,
    pub flagged: bool,
}

/// Normalization coefficients and Gaussian diagnostics for one activation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationCoefficients {
    pub activation: String,
    pub context: NormalizationContext,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub xi: f64,
    pub eta: f64,
    /// `∫ f′² Dz`
    pub m2: f64,
    /// `∫ f′⁴ Dz`
    pub m4: f64,
    pub quadrature: QuadratureCheck,
}

impl NormalizationCoefficients {
    pub fn m2_squared(&self) -> f64 {
        self.m2 * self.m2
    }
}

#[derive(Debug, Clone, Copy)]
struct RawMoments {
    alpha: f64,
    beta: f64,
    gamma_sq: f64,
    eta: f64,
    m2: f64,
    m4: f64,
}

fn raw_moments(a: &Activation, scale: f64, rule: &QuadratureRule) -> Result<RawMoments> {
    let f = |z: f64| a.value(scale * z);
    let df = |z: f64| a.derivative(scale * z);
    let alpha = rule.integrate(df)?;
    let beta = rule.integrate(f)?;
    let gamma_sq = rule.integrate(|z| (f(z) - alpha * scale * z - beta).powi(2))?;
    let eta = rule.integrate(|z| f(z).powi(2))?;
    let m2 = rule.integrate(|z| df(z).powi(2))?;
    let m4 = rule.integrate(|z| df(z).powi(4))?;
    Ok(RawMoments {
        alpha,
        beta,
        gamma_sq,
        eta,
        m2,
        m4,
    })
}

fn describe(rule: &QuadratureRule) -> String {
    match rule.kind() {
        RuleKind::GaussHermite => format!("gauss-hermite({})", rule.order()),
        RuleKind::CompositeTrapezoid { .. } => format!("composite-trapezoid({})", rule.order()),
    }
}

/// Kinks of `a` mapped into the integration variable `z = x/σ`.
fn scaled_kinks(a: &Activation, scale: f64) -> Vec<f64> {
    a.kinks().iter().map(|k| k / scale).collect()
}

/// Computes the coefficients of `a` under `ctx` with the given rule, and
/// re-derives every integral with an independent rule to flag quadrature trouble.
///
/// The check rule is the composite rule when `rule` is Gauss–Hermite, and the
/// composite rule at half the panel count otherwise.
pub fn compute_coefficients(
    a: &Activation,
    ctx: &NormalizationContext,
    rule: &QuadratureRule,
) -> Result<NormalizationCoefficients> {
    let scale = ctx.scale();
    let primary = raw_moments(a, scale, rule)?;

    let kinks = scaled_kinks(a, scale);
    let check_rule = match rule.kind() {
        RuleKind::GaussHermite => quadrature::composite_trapezoid(&kinks, quadrature::DEFAULT_PANELS)?,
        RuleKind::CompositeTrapezoid { breakpoints } => {
            quadrature::composite_trapezoid(breakpoints, (rule.order() / 2).max(2))?
        }
    };
    let check = raw_moments(a, scale, &check_rule)?;
    let max_discrepancy = [
        (primary.alpha, check.alpha),
        (primary.beta, check.beta),
        (primary.gamma_sq, check.gamma_sq),
        (primary.eta, check.eta),
        (primary.m2, check.m2),
        (primary.m4, check.m4),
    ]
    .iter()
    .map(|(p, c)| (p - c).abs())
    .fold(0.0, f64::max);

    let gamma = primary.gamma_sq.max(0.0).sqrt();
    if gamma < 1e-10 {
        return Err(Error::DegenerateActivation {
            name: a.name().to_string(),
            gamma,
        });
    }

    Ok(NormalizationCoefficients {
        activation: a.name().to_string(),
        context: *ctx,
        alpha: primary.alpha,
        beta: primary.beta,
        gamma,
        xi: primary.alpha * primary.alpha,
        eta: primary.eta,
        m2: primary.m2,
        m4: primary.m4,
        quadrature: QuadratureCheck {
            primary: describe(rule),
            check: describe(&check_rule),
            max_discrepancy,
            flagged: max_discrepancy > DISCREPANCY_TOLERANCE,
        },
    })
}

/// The rule [`coefficients`] uses for `a`: Gauss–Hermite of the default order for
/// smooth activations, the composite rule split at the (scaled) kinks otherwise.
pub fn default_rule_for(a: &Activation, ctx: &NormalizationContext) -> Result<Arc<QuadratureRule>> {
    quadrature::select_rule(quadrature::DEFAULT_ORDER, &scaled_kinks(a, ctx.scale()))
}

/// Thread-safe memo of coefficients keyed by activation name and the exact bits
/// of the context.
#[derive(Debug, Default)]
pub struct CoefficientCache {
    entries: RwLock<HashMap<(String, [u64; 3]), NormalizationCoefficients>>,
}

impl CoefficientCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_compute(
        &self,
        a: &Activation,
        ctx: &NormalizationContext,
    ) -> Result<NormalizationCoefficients> {
        let key = (a.name().to_string(), ctx.key());
        if let Some(hit) = self.entries.read().expect("cache poisoned").get(&key) {
            return Ok(hit.clone());
        }
        let rule = default_rule_for(a, ctx)?;
        let computed = compute_coefficients(a, ctx, &rule)?;
        self.entries
            .write()
            .expect("cache poisoned")
            .entry(key)
            .or_insert_with(|| computed.clone());
        Ok(computed)
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Coefficients from the process-wide cache, computed with the default rule.
pub fn coefficients(a: &Activation, ctx: &NormalizationContext) -> Result<NormalizationCoefficients> {
    static CACHE: OnceLock<CoefficientCache> = OnceLock::new();
    CACHE.get_or_init(CoefficientCache::new).get_or_compute(a, ctx)
}

/// `f_H(x) = (f(x) − αx − β)/γ` with derivative `(f′(x) − α)/γ`.
pub fn normalize(a: &Activation, c: &NormalizationCoefficients) -> Result<Activation> {
    if c.activation != a.name() {
        return Err(Error::invalid(format!(
            "coefficients were computed for `{}`, not `{}`",
            c.activation,
            a.name()
        )));
    }
    if !(c.gamma > 0.0) {
        return Err(Error::invalid(format!("gamma must be positive, got {}", c.gamma)));
    }
    let (alpha, beta, gamma) = (c.alpha, c.beta, c.gamma);
    let value_src = a.clone();
    let deriv_src = a.clone();
    let mut out = Activation::new(
        format!("{NORMALIZED_PREFIX}{}", a.name()),
        move |x| (value_src.value(x) - alpha * x - beta) / gamma,
        move |x| (deriv_src.derivative(x) - alpha) / gamma,
    )
    .with_kinks(a.kinks());
    if let Some(l) = a.lipschitz_hint() {
        out = out.with_lipschitz((l + alpha.abs()) / gamma);
    }
    Ok(out)
}

/// `(ξ, η)` of an activation under the unit Gaussian: `ξ = (∫ f′ Dz)²`, `η = ∫ f² Dz`.
pub fn recompute_diagnostics(a: &Activation, rule: &QuadratureRule) -> Result<(f64, f64)> {
    let slope = rule.integrate(|z| a.derivative(z))?;
    let eta = rule.integrate(|z| a.value(z).powi(2))?;
    Ok((slope * slope, eta))
}

/// Resolves a registry name, or `normalized_<name>` to the normalized variant
/// under the default context.
pub fn resolve_activation(name: &str) -> Result<Activation> {
    match name.strip_prefix(NORMALIZED_PREFIX) {
        Some(base) => {
            let a = activation::get(base)?;
            let c = coefficients(&a, &NormalizationContext::default())?;
            normalize(&a, &c)
        }
        None => activation::get(name),
    }
}

/// Multiplies an activation (and its derivative) by a constant.
pub fn rescale(a: &Activation, factor: f64) -> Activation {
    let v = a.clone();
    let d = a.clone();
    let mut out = Activation::new(
        format!("{}*{factor}", a.name()),
        move |x| factor * v.value(x),
        move |x| factor * d.derivative(x),
    )
    .with_kinks(a.kinks());
    if let Some(l) = a.lipschitz_hint() {
        out = out.with_lipschitz(l * factor.abs());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn coeffs(name: &str) -> NormalizationCoefficients {
        coefficients(&activation::get(name).unwrap(), &NormalizationContext::default()).unwrap()
    }

    #[test]
    fn context_validation() {
        assert!(NormalizationContext::new(0.0, 1.0).is_err());
        assert!(NormalizationContext::with_q_star(1.0, 1.0, -1.0).is_err());
        let ctx = NormalizationContext::new(2.0, 0.5).unwrap();
        assert_eq!(ctx.q_star(), 1.0);
        let d = NormalizationContext::default();
        assert_eq!((d.sigma_w(), d.sigma_x(), d.q_star()), (1.0, 1.0, 1.0));
    }

    #[test]
    fn relu_closed_forms() {
        let c = coeffs("relu");
        assert_abs_diff_eq!(c.alpha, 0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(c.beta, 1.0 / (2.0 * PI).sqrt(), epsilon = 1e-10);
        assert_abs_diff_eq!(c.gamma, (0.25 - 1.0 / (2.0 * PI)).sqrt(), epsilon = 1e-10);
        assert_abs_diff_eq!(c.gamma, 0.301405, epsilon = 1e-5);
        assert_abs_diff_eq!(c.m2_squared(), 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(c.m4, 0.5, epsilon = 1e-12);
        assert!(!c.quadrature.flagged, "{:?}", c.quadrature);
    }

    #[test]
    fn tanh_reference_row() {
        let c = coeffs("tanh");
        assert_abs_diff_eq!(c.alpha, 0.605706, epsilon = 1e-4);
        assert_abs_diff_eq!(c.beta, 0.0, epsilon = 1e-8);
        assert_abs_diff_eq!(c.gamma, 0.165576, epsilon = 1e-4);
        assert!(!c.quadrature.flagged, "{:?}", c.quadrature);
    }

    #[test]
    fn coefficient_invariants() {
        for a in activation::all() {
            let c = coeffs(a.name());
            assert_abs_diff_eq!(c.xi, c.alpha * c.alpha, epsilon = 1e-10);
            assert!(c.m4 >= c.m2 * c.m2 - 1e-12, "{}", a.name());
            let rule = default_rule_for(&a, &c.context).unwrap();
            let direct = rule
                .integrate(|z| (a.value(z) - c.alpha * z - c.beta).powi(2))
                .unwrap();
            assert_abs_diff_eq!(c.gamma * c.gamma, direct, epsilon = 1e-8);
        }
    }

    #[test]
    fn identity_is_degenerate() {
        let rule = quadrature::build_rule(32).unwrap();
        let err = compute_coefficients(&Activation::identity(), &NormalizationContext::default(), &rule)
            .unwrap_err();
        assert!(matches!(err, Error::DegenerateActivation { .. }));
    }

    #[test]
    fn normalized_relu_at_zero() {
        let relu = activation::get("relu").unwrap();
        let c = coeffs("relu");
        let h = normalize(&relu, &c).unwrap();
        assert_abs_diff_eq!(h.value(0.0), -c.beta / c.gamma, epsilon = 1e-12);
        assert_abs_diff_eq!(h.value(0.0), -1.3236, epsilon = 1e-4);
    }

    #[test]
    fn mismatched_coefficients_rejected() {
        let c = coeffs("relu");
        let tanh = activation::get("tanh").unwrap();
        assert!(matches!(normalize(&tanh, &c), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn scaled_context_normalizes_at_that_scale() {
        let ctx = NormalizationContext::new(1.5, 1.2).unwrap();
        let tanh = activation::get("tanh").unwrap();
        let c = coefficients(&tanh, &ctx).unwrap();
        let h = normalize(&tanh, &c).unwrap();
        let rule = quadrature::build_rule(quadrature::DEFAULT_ORDER).unwrap();
        let s = ctx.scale();
        let slope = rule.integrate(|z| h.derivative(s * z)).unwrap();
        let eta = rule.integrate(|z| h.value(s * z).powi(2)).unwrap();
        assert_abs_diff_eq!(slope, 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(eta, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn cache_is_keyed_by_context_bits() {
        let cache = CoefficientCache::new();
        let relu = activation::get("relu").unwrap();
        let a = cache.get_or_compute(&relu, &NormalizationContext::default()).unwrap();
        let b = cache.get_or_compute(&relu, &NormalizationContext::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(cache.len(), 1);
        cache
            .get_or_compute(&relu, &NormalizationContext::new(1.0, 1.0 + f64::EPSILON).unwrap())
            .unwrap();
        assert_eq!(cache.len(), 2);
    }

    #[test]
    fn resolve_normalized_names() {
        let h = resolve_activation("normalized_tanh").unwrap();
        assert_eq!(h.name(), "normalized_tanh");
        assert!(resolve_activation("normalized_nope").is_err());
        assert_eq!(resolve_activation("relu").unwrap().name(), "relu");
    }
}

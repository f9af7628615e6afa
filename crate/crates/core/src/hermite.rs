//! Probabilists' Hermite polynomials and Gaussian-orthonormal expansions.
//!
//! Expansions use the normalized convention `f(x) = Σ fₙ · Heₙ(x)/√(n!)`, so the
//! basis `ψₙ = Heₙ/√(n!)` is orthonormal in `L²(Dz)` and Parseval reads
//! `∫ f² Dz = Σ fₙ²`.

use std::io::{self, Write};

use crate::activation::Activation;
use crate::error::{Error, Result};
use crate::quadrature::{self, QuadratureRule};

/// Highest polynomial degree supported by [`hermite_poly`] and [`expand`].
pub const MAX_DEGREE: usize = 64;
/// Default truncation order of an expansion.
pub const DEFAULT_TRUNCATION: usize = 40;

/// `Heₙ(x)` by the three-term recurrence `Heₙ₊₁ = x·Heₙ − n·Heₙ₋₁`.
pub fn hermite_poly(n: usize, x: f64) -> Result<f64> {
    if n > MAX_DEGREE {
        return Err(Error::UnsupportedOrder(n));
    }
    let (mut prev, mut cur) = (0.0, 1.0);
    for k in 0..n {
        let next = x * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// `ψ₀(x) … ψ_K(x)` with `ψₙ = Heₙ/√(n!)`, using the orthonormal recurrence
/// so that no factorials are formed.
pub fn orthonormal_values(k_max: usize, x: f64, out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    if k_max == 0 {
        return;
    }
    out.push(x);
    for n in 1..k_max {
        let next = (x * out[n] - (n as f64).sqrt() * out[n - 1]) / ((n + 1) as f64).sqrt();
        out.push(next);
    }
}

/// Truncated expansion `f₀ … f_K` of an activation in the orthonormal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteExpansion {
    coefficients: Vec<f64>,
    source_activation: String,
    /// `∫ f′ Dz`, which equals `f₁` by Stein's identity.
    stein_slope: Option<f64>,
}

impl HermiteExpansion {
    pub fn from_coefficients(source: impl Into<String>, coefficients: Vec<f64>) -> Self {
        HermiteExpansion {
            coefficients,
            source_activation: source.into(),
            stein_slope: None,
        }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn truncation_order(&self) -> usize {
        self.coefficients.len().saturating_sub(1)
    }

    pub fn source_activation(&self) -> &str {
        &self.source_activation
    }

    pub fn coefficient(&self, n: usize) -> f64 {
        self.coefficients.get(n).copied().unwrap_or(0.0)
    }

    /// `|f₁ − ∫ f′ Dz|`, when the derivative route was computed.
    pub fn slope_gap(&self) -> Option<f64> {
        self.stein_slope.map(|s| (s - self.coefficient(1)).abs())
    }

    pub fn stein_slope(&self) -> Option<f64> {
        self.stein_slope
    }

    /// `Σ_{n=0..K} fₙ²`.
    pub fn energy(&self) -> f64 {
        self.coefficients.iter().map(|c| c * c).sum()
    }

    /// `Σ_{n=2..K} fₙ²`, the squared norm of the projection onto order ≥ 2.
    pub fn higher_order_energy(&self) -> f64 {
        self.coefficients.iter().skip(2).map(|c| c * c).sum()
    }

    /// `ξ = f₁²`.
    pub fn xi(&self) -> f64 {
        self.coefficient(1).powi(2)
    }

    /// Evaluates the truncated series at `x`.
    pub fn evaluate(&self, x: f64) -> f64 {
        let mut basis = Vec::with_capacity(self.coefficients.len());
        orthonormal_values(self.truncation_order(), x, &mut basis);
        basis.iter().zip(&self.coefficients).map(|(p, c)| p * c).sum()
    }

    /// `∫ (f − reconstruction)² Dz` over `rule`.
    pub fn reconstruction_error(&self, a: &Activation, rule: &QuadratureRule) -> Result<f64> {
        rule.integrate(|z| (a.value(z) - self.evaluate(z)).powi(2))
    }

    /// Writes `n,f_n` rows with a header line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "n,f_n")?;
        for (n, c) in self.coefficients.iter().enumerate() {
            writeln!(out, "{n},{c:e}")?;
        }
        Ok(())
    }
}

/// `fₙ = ∫ f(z) ψₙ(z) Dz` for `n = 0..=k_max`, plus the derivative-route slope.
pub fn expand(a: &Activation, k_max: usize, rule: &QuadratureRule) -> Result<HermiteExpansion> {
    if k_max > MAX_DEGREE {
        return Err(Error::UnsupportedOrder(k_max));
    }
    if rule.order() < 2 * k_max {
        return Err(Error::invalid(format!(
            "quadrature order {} too low for truncation order {k_max} (need >= {})",
            rule.order(),
            2 * k_max
        )));
    }

    let mut coefficients = vec![0.0; k_max + 1];
    let mut basis = Vec::with_capacity(k_max + 1);
    let mut stein = 0.0;
    for (&x, &w) in rule.nodes().iter().zip(rule.weights()) {
        let fx = a.value(x);
        let dfx = a.derivative(x);
        if !fx.is_finite() || !dfx.is_finite() {
            let bad = if fx.is_finite() { dfx } else { fx };
            return Err(Error::non_finite(format!("{} at x = {x:e}", a.name()), bad));
        }
        orthonormal_values(k_max, x, &mut basis);
        for (c, p) in coefficients.iter_mut().zip(&basis) {
            *c += w * fx * p;
        }
        stein += w * dfx;
    }

    Ok(HermiteExpansion {
        coefficients,
        source_activation: a.name().to_string(),
        stein_slope: Some(stein),
    })
}

/// [`expand`] with the rule chosen from the activation's smoothness.
pub fn expand_auto(a: &Activation, k_max: usize) -> Result<HermiteExpansion> {
    let order = quadrature::DEFAULT_ORDER.max(2 * k_max).min(quadrature::MAX_ORDER);
    let rule = quadrature::select_rule(order, a.kinks())?;
    expand(a, k_max, &rule)
}

/// Zeroes `f₀` and `f₁` and rescales the rest to unit norm.
pub fn project_to_h(e: &HermiteExpansion) -> Result<HermiteExpansion> {
    let total = e.energy().sqrt();
    let s = e.higher_order_energy().sqrt();
    if s <= 1e-10 * total || s == 0.0 {
        return Err(Error::DegenerateProjection);
    }
    let coefficients = e
        .coefficients
        .iter()
        .enumerate()
        .map(|(n, c)| if n < 2 { 0.0 } else { c / s })
        .collect();
    Ok(HermiteExpansion {
        coefficients,
        source_activation: e.source_activation.clone(),
        stein_slope: Some(0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn recurrence_examples() {
        assert_eq!(hermite_poly(0, 17.5).unwrap(), 1.0);
        assert_eq!(hermite_poly(1, 3.0).unwrap(), 3.0);
        assert_eq!(hermite_poly(2, 2.0).unwrap(), 3.0);
        assert_abs_diff_eq!(hermite_poly(3, 1.5).unwrap(), 1.5f64.powi(3) - 3.0 * 1.5);
        assert!(matches!(hermite_poly(65, 0.0), Err(Error::UnsupportedOrder(65))));
    }

    #[test]
    fn orthonormal_matches_scaled_polynomial() {
        let mut basis = Vec::new();
        orthonormal_values(10, 0.7, &mut basis);
        let mut fact = 1.0;
        for (n, p) in basis.iter().enumerate() {
            if n > 0 {
                fact *= n as f64;
            }
            assert_abs_diff_eq!(*p, hermite_poly(n, 0.7).unwrap() / fact.sqrt(), epsilon = 1e-12);
        }
    }

    #[test]
    fn identity_expansion() {
        let rule = quadrature::build_rule(64).unwrap();
        let e = expand(&Activation::identity(), 4, &rule).unwrap();
        let expected = [0.0, 1.0, 0.0, 0.0, 0.0];
        for (c, x) in e.coefficients().iter().zip(expected) {
            assert_abs_diff_eq!(*c, x, epsilon = 1e-12);
        }
        assert!(matches!(project_to_h(&e), Err(Error::DegenerateProjection)));
    }

    #[test]
    fn relu_leading_coefficients() {
        let e = expand_auto(&activation::get("relu").unwrap(), 8).unwrap();
        assert_abs_diff_eq!(e.coefficient(0), 1.0 / (2.0 * PI).sqrt(), epsilon = 1e-10);
        assert_abs_diff_eq!(e.coefficient(1), 0.5, epsilon = 1e-10);
        assert!(e.slope_gap().unwrap() < 1e-6);
    }

    #[test]
    fn tanh_has_no_constant_term() {
        let e = expand_auto(&activation::get("tanh").unwrap(), 10).unwrap();
        assert_abs_diff_eq!(e.coefficient(0), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn rule_order_guard() {
        let rule = quadrature::build_rule(16).unwrap();
        let tanh = activation::get("tanh").unwrap();
        assert!(matches!(expand(&tanh, 9, &rule), Err(Error::InvalidArgument(_))));
        assert!(expand(&tanh, 8, &rule).is_ok());
        assert!(matches!(expand(&tanh, 65, &rule), Err(Error::UnsupportedOrder(65))));
    }

    #[test]
    fn projection_definition_and_idempotence() {
        let e = HermiteExpansion::from_coefficients("x", vec![0.4, 0.5, 0.3, -0.4, 0.0]);
        let p = project_to_h(&e).unwrap();
        assert_eq!(p.coefficients(), &[0.0, 0.0, 0.6, -0.8, 0.0]);
        let pp = project_to_h(&p).unwrap();
        for (a, b) in p.coefficients().iter().zip(pp.coefficients()) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-15);
        }
    }

    #[test]
    fn csv_export() {
        let e = HermiteExpansion::from_coefficients("x", vec![1.0, 0.5]);
        let mut buf = Vec::new();
        e.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "n,f_n\n0,1e0\n1,5e-1\n");
    }
}

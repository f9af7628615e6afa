//! Stieltjes, moment-generating, M- and S-transforms.
//!
//! Sign conventions:
//!
//! * [`stieltjes_transform`] is `G(z) = ∫ ρ(λ)/(λ − z) dλ = E[tr (X − zI)⁻¹]/N`,
//!   so `z·G(z) → −1` as `|z| → ∞`.
//! * [`cauchy_transform`] is the leading-minus convention `−E[tr (X − zI)⁻¹]/N`,
//!   i.e. `∫ ρ(λ)/(z − λ) dλ`.
//! * [`moment_generating_function`] is `Σ_{k≥0} m_k zᵏ = ∫ ρ(λ)/(1 − zλ) dλ`. For the
//!   unit Marcenko–Pastur law its coefficients are the Catalan numbers and it
//!   solves `z·G² − G + 1 = 0`.
//! * `M(z) = Σ_{k≥1} m_k z⁻ᵏ` and `S(z) = (1 + z)/(z·M⁻¹(z))`, where `S_{AB} = S_A·S_B`
//!   for freely independent `A`, `B`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::density::SpectralDensity;
use super::empirical::EmpiricalSpectrum;
use super::series::PowerSeries;
use crate::activation::Activation;
use crate::error::{Error, Result};
use crate::quadrature::{self, QuadratureRule};

/// Largest series order accepted by the S-transform routines.
pub const MAX_S_ORDER: usize = 8;
/// Largest order accepted by [`nonlinearity_moments`].
pub const MAX_NONLINEARITY_ORDER: usize = 16;

/// A spectral measure that expectations can be taken against.
pub trait SpectralMeasure {
    fn support(&self) -> (f64, f64);
    fn expect_complex<G: Fn(f64) -> Complex64>(&self, g: G) -> Complex64;
}

impl SpectralMeasure for SpectralDensity {
    fn support(&self) -> (f64, f64) {
        SpectralDensity::support(self)
    }

    fn expect_complex<G: Fn(f64) -> Complex64>(&self, g: G) -> Complex64 {
        SpectralDensity::expect_complex(self, g)
    }
}

impl SpectralMeasure for EmpiricalSpectrum {
    fn support(&self) -> (f64, f64) {
        let v = self.eigenvalues();
        (v[v.len() - 1], v[0])
    }

    fn expect_complex<G: Fn(f64) -> Complex64>(&self, g: G) -> Complex64 {
        let sum: Complex64 = self.eigenvalues().iter().map(|&x| g(x)).sum();
        sum / self.len() as f64
    }
}

fn check_off_support<M: SpectralMeasure>(m: &M, z: Complex64) -> Result<()> {
    let (lo, hi) = m.support();
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::non_finite("transform argument", z.re + z.im));
    }
    if z.im == 0.0 && z.re >= lo && z.re <= hi {
        return Err(Error::invalid(format!(
            "z = {} lies on the support [{lo}, {hi}]",
            z.re
        )));
    }
    Ok(())
}

/// `∫ ρ(λ)/(λ − z) dλ`.
pub fn stieltjes_transform<M: SpectralMeasure>(m: &M, z: Complex64) -> Result<Complex64> {
    check_off_support(m, z)?;
    Ok(m.expect_complex(|x| 1.0 / (x - z)))
}

/// `−E[tr (X − zI)⁻¹]/N = ∫ ρ(λ)/(z − λ) dλ`.
pub fn cauchy_transform<M: SpectralMeasure>(m: &M, z: Complex64) -> Result<Complex64> {
    stieltjes_transform(m, z).map(|g| -g)
}

/// `∫ ρ(λ)/(1 − zλ) dλ`; singular where `1/z` meets the support.
pub fn moment_generating_function<M: SpectralMeasure>(m: &M, z: Complex64) -> Result<Complex64> {
    if z == Complex64::new(0.0, 0.0) {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let inv = 1.0 / z;
    check_off_support(m, inv)?;
    Ok(m.expect_complex(|x| 1.0 / (1.0 - z * x)))
}

/// Which family a [`MomentSeries`] belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MomentKind {
    Matrix,
    Nonlinearity,
}

/// Moments `m₁ … m_K` (index 0 holds `m₁`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSeries {
    moments: Vec<f64>,
    kind: MomentKind,
}

impl MomentSeries {
    pub fn new(moments: Vec<f64>, kind: MomentKind) -> Self {
        MomentSeries { moments, kind }
    }

    /// `m_k = cᵏ`: the spectrum of `c·I`.
    pub fn point_mass(c: f64, k_max: usize) -> Self {
        MomentSeries::new((1..=k_max).map(|k| c.powi(k as i32)).collect(), MomentKind::Matrix)
    }

    pub fn of_density(d: &SpectralDensity, k_max: usize) -> Self {
        MomentSeries::new((1..=k_max as u32).map(|k| d.moment(k)).collect(), MomentKind::Matrix)
    }

    pub fn of_spectrum(s: &EmpiricalSpectrum, k_max: usize) -> Self {
        MomentSeries::new((1..=k_max as u32).map(|k| s.moment(k)).collect(), MomentKind::Matrix)
    }

    pub fn moments(&self) -> &[f64] {
        &self.moments
    }

    pub fn kind(&self) -> MomentKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.moments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moments.is_empty()
    }

    /// `m_k` for `k ≥ 1`.
    pub fn get(&self, k: usize) -> f64 {
        self.moments[k - 1]
    }

    /// Moments of the measure dilated by `c`: `m_k ↦ cᵏ m_k`.
    pub fn scaled(&self, c: f64) -> Self {
        MomentSeries::new(
            self.moments
                .iter()
                .enumerate()
                .map(|(i, m)| m * c.powi(i as i32 + 1))
                .collect(),
            self.kind,
        )
    }

    /// `[[1, m₁], [m₁, m₂]]` is positive semidefinite.
    pub fn hankel_2x2_psd(&self) -> bool {
        self.len() < 2 || self.get(2) - self.get(1).powi(2) >= -1e-12
    }

    /// `max(1, max_k |m_k|^{1/k})`, the growth radius used by the M-transform guard.
    pub fn growth_radius(&self) -> f64 {
        self.moments
            .iter()
            .enumerate()
            .map(|(i, m)| m.abs().powf(1.0 / (i + 1) as f64))
            .fold(1.0, f64::max)
    }
}

/// `μ_k = ∫ f′(√q*·h)^{2k} Dh` for `k = 1..=k_max`.
pub fn nonlinearity_moments(
    a: &Activation,
    q_star: f64,
    k_max: usize,
    rule: &QuadratureRule,
) -> Result<MomentSeries> {
    if k_max == 0 || k_max > MAX_NONLINEARITY_ORDER {
        return Err(Error::invalid(format!(
            "moment order must lie in [1, {MAX_NONLINEARITY_ORDER}], got {k_max}"
        )));
    }
    if !(q_star.is_finite() && q_star > 0.0) {
        return Err(Error::invalid(format!("q* must be positive, got {q_star}")));
    }
    let s = q_star.sqrt();
    let moments = (1..=k_max)
        .map(|k| rule.integrate(|h| a.derivative(s * h).powi(2 * k as i32)))
        .collect::<Result<Vec<_>>>()?;
    Ok(MomentSeries::new(moments, MomentKind::Nonlinearity))
}

/// [`nonlinearity_moments`] with the rule chosen from the activation's kinks.
pub fn nonlinearity_moments_auto(a: &Activation, q_star: f64, k_max: usize) -> Result<MomentSeries> {
    let s = q_star.sqrt();
    let kinks: Vec<f64> = a.kinks().iter().map(|k| k / s).collect();
    let rule = quadrature::select_rule(quadrature::DEFAULT_ORDER, &kinks)?;
    nonlinearity_moments(a, q_star, k_max, &rule)
}

/// Truncated `M(z) = Σ_{k≤K} m_k z⁻ᵏ`.
///
/// Requires `|z| ≥ 2·max(1, max_k |m_k|^{1/k})` so the neglected tail is small.
pub fn m_transform_from_moments(ms: &MomentSeries, z: Complex64) -> Result<Complex64> {
    let guard = 2.0 * ms.growth_radius();
    let modulus = z.norm();
    if !(modulus >= guard) {
        return Err(Error::Convergence { modulus, guard });
    }
    let inv = 1.0 / z;
    let mut power = Complex64::new(1.0, 0.0);
    let mut acc = Complex64::new(0.0, 0.0);
    for &m in ms.moments() {
        power *= inv;
        acc += m * power;
    }
    Ok(acc)
}

/// Taylor coefficients `s₀ … s_{K−1}` of `S(z)` at `z = 0`, from `m₁ … m_K`.
///
/// With `w = 1/z`, `M = g(w) = Σ m_k wᵏ`, so `M⁻¹(u) = 1/g⁻¹(u)` and
/// `S(u) = (1 + u)·g⁻¹(u)/u`.
pub fn s_transform_from_moments(ms: &MomentSeries, k: usize) -> Result<Vec<f64>> {
    if k == 0 || k > MAX_S_ORDER {
        return Err(Error::invalid(format!("S-transform order must lie in [1, {MAX_S_ORDER}], got {k}")));
    }
    if ms.len() < k {
        return Err(Error::invalid(format!("need {k} moments, have {}", ms.len())));
    }
    if ms.get(1) == 0.0 {
        return Err(Error::DegenerateTransform("first moment is zero".into()));
    }
    let mut g = vec![0.0; k + 1];
    g[1..].copy_from_slice(&ms.moments()[..k]);
    let inverse = PowerSeries::new(g)
        .revert()
        .ok_or_else(|| Error::DegenerateTransform("moment series is not invertible".into()))?;
    // (1 + u)·Σ b_j u^{j−1}
    Ok((0..k).map(|j| inverse.coeff(j + 1) + inverse.coeff(j)).collect())
}

/// Inverse of [`s_transform_from_moments`]: `m₁ … m_K` from `s₀ … s_{K−1}`.
pub fn moments_from_s_transform(s: &[f64], kind: MomentKind) -> Result<MomentSeries> {
    let k = s.len();
    if k == 0 || k > MAX_S_ORDER {
        return Err(Error::invalid(format!("S-transform order must lie in [1, {MAX_S_ORDER}], got {k}")));
    }
    if s[0] == 0.0 {
        return Err(Error::DegenerateTransform("S(0) is zero".into()));
    }
    // g⁻¹(u) = u·S(u)/(1 + u)
    let mut inverse = vec![0.0; k + 1];
    let mut running = 0.0;
    for j in 0..k {
        running = s[j] - running;
        inverse[j + 1] = running;
    }
    let g = PowerSeries::new(inverse)
        .revert()
        .ok_or_else(|| Error::DegenerateTransform("S series is not invertible".into()))?;
    Ok(MomentSeries::new(g.coeffs()[1..].to_vec(), kind))
}

/// Coefficientwise product of two S-transform series (free multiplicative convolution).
pub fn multiply_s_series(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().min(b.len());
    PowerSeries::new(a[..n].to_vec())
        .mul(&PowerSeries::new(b[..n].to_vec()))
        .into_coeffs()
}

/// `S_{JJᵀ} = S_{D²}^L · S_{WWᵀ}^L` for `depth` identical layers.
pub fn jacobian_s_transform(
    nonlinearity: &MomentSeries,
    weights: &MomentSeries,
    depth: usize,
    k: usize,
) -> Result<Vec<f64>> {
    let sd = s_transform_from_moments(nonlinearity, k)?;
    let sw = s_transform_from_moments(weights, k)?;
    let layer = multiply_s_series(&sd, &sw);
    let mut out = vec![0.0; k];
    out[0] = 1.0;
    for _ in 0..depth {
        out = multiply_s_series(&out, &layer);
    }
    Ok(out)
}

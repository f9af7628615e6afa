//! Continuous spectral densities on a compact support.

use std::f64::consts::PI;
use std::fmt;
use std::io::{self, Write};
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// A probability density on `[a, b]`.
///
/// Integrals use the substitution `λ = c − r·cos t` with `t ∈ (0, π)` and the
/// midpoint rule in `t`. The substitution absorbs square-root edges (such as
/// the Marcenko–Pastur edges, or its `1/√λ` singularity at `φ = 1`) so the
/// midpoint rule converges spectrally.
#[derive(Clone)]
pub struct SpectralDensity {
    name: String,
    support: (f64, f64),
    density: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for SpectralDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralDensity")
            .field("name", &self.name)
            .field("support", &self.support)
            .finish_non_exhaustive()
    }
}

const MIN_POINTS: usize = 256;
const MAX_POINTS: usize = 1 << 20;
const REL_TOL: f64 = 1e-13;

impl SpectralDensity {
    pub fn new<F>(name: impl Into<String>, lo: f64, hi: f64, density: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::invalid(format!("invalid support [{lo}, {hi}]")));
        }
        Ok(SpectralDensity {
            name: name.into(),
            support: (lo, hi),
            density: Arc::new(density),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    pub fn contains(&self, x: f64) -> bool {
        (self.support.0..=self.support.1).contains(&x)
    }

    /// Density value; zero outside the support.
    pub fn density(&self, x: f64) -> f64 {
        if self.contains(x) {
            (self.density)(x)
        } else {
            0.0
        }
    }

    fn midpoint_sum<G>(&self, points: usize, t_max: f64, g: &G) -> Complex64
    where
        G: Fn(f64) -> Complex64,
    {
        let (lo, hi) = self.support;
        let (c, r) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        let h = t_max / points as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..points {
            let t = (i as f64 + 0.5) * h;
            let x = c - r * t.cos();
            let jac = r * t.sin();
            acc += g(x) * ((self.density)(x) * jac);
        }
        acc * h
    }

    /// `∫ g(λ) ρ(λ) dλ` with point doubling until the relative change is below 1e-13.
    pub fn expect_complex<G>(&self, g: G) -> Complex64
    where
        G: Fn(f64) -> Complex64,
    {
        let mut points = MIN_POINTS;
        let mut prev = self.midpoint_sum(points, PI, &g);
        while points < MAX_POINTS {
            // Midpoint rules do not nest, so each level is a fresh sum.
            points *= 2;
            let next = self.midpoint_sum(points, PI, &g);
            if (next - prev).norm() <= REL_TOL * next.norm().max(1e-300) {
                return next;
            }
            prev = next;
        }
        prev
    }

    pub fn expect<G>(&self, g: G) -> f64
    where
        G: Fn(f64) -> f64,
    {
        self.expect_complex(|x| Complex64::new(g(x), 0.0)).re
    }

    /// Total mass, `∫ ρ`.
    pub fn mass(&self) -> f64 {
        self.expect(|_| 1.0)
    }

    /// `m_k = ∫ λᵏ ρ(λ) dλ`.
    pub fn moment(&self, k: u32) -> f64 {
        self.expect(|x| x.powi(k as i32))
    }

    /// Cumulative distribution `∫_a^x ρ`.
    pub fn cdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support;
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        let (c, r) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        let t_x = ((c - x) / r).clamp(-1.0, 1.0).acos();
        let one = |_: f64| Complex64::new(1.0, 0.0);
        let points = ((4096.0 * t_x / PI).ceil() as usize).max(64);
        self.midpoint_sum(points, t_x, &one).re
    }

    /// Writes `samples` evenly spaced `(x, density)` rows across the support.
    pub fn write_csv<W: Write>(&self, mut out: W, samples: usize) -> io::Result<()> {
        writeln!(out, "x,density")?;
        let (lo, hi) = self.support;
        let n = samples.max(2);
        for i in 0..n {
            let x = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            let d = self.density(x);
            writeln!(out, "{x:e},{:e}", if d.is_finite() { d } else { f64::INFINITY })?;
        }
        Ok(())
    }
}

/// Marcenko–Pastur density with shape `φ ∈ (0, 1]`:
/// `√(((1+√φ)² − x)(x − (1−√φ)²)) / (2πφx)` on `[(1−√φ)², (1+√φ)²]`.
pub fn mp_density(phi: f64) -> Result<SpectralDensity> {
    if !(phi > 0.0 && phi <= 1.0) {
        return Err(Error::invalid(format!("Marcenko-Pastur shape must lie in (0, 1], got {phi}")));
    }
    let lo = (1.0 - phi.sqrt()).powi(2);
    let hi = (1.0 + phi.sqrt()).powi(2);
    SpectralDensity::new(format!("marcenko-pastur({phi})"), lo, hi, move |x| {
        ((hi - x) * (x - lo)).max(0.0).sqrt() / (2.0 * PI * phi * x)
    })
}

//! Truncated real power series: product, composition and reversion.

/// `Σ cₖ uᵏ` for `k < len`; everything at or above `len` is discarded.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSeries {
    coeffs: Vec<f64>,
}

impl PowerSeries {
    pub fn new(coeffs: Vec<f64>) -> Self {
        PowerSeries { coeffs }
    }

    pub fn zeros(len: usize) -> Self {
        PowerSeries { coeffs: vec![0.0; len] }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    pub fn mul(&self, other: &PowerSeries) -> PowerSeries {
        let n = self.len().min(other.len());
        let mut out = vec![0.0; n];
        for (i, a) in self.coeffs.iter().take(n).enumerate() {
            for (j, b) in other.coeffs.iter().take(n - i).enumerate() {
                out[i + j] += a * b;
            }
        }
        PowerSeries::new(out)
    }

    pub fn pow(&self, e: usize) -> PowerSeries {
        let mut out = PowerSeries::zeros(self.len());
        if !out.is_empty() {
            out.coeffs[0] = 1.0;
        }
        for _ in 0..e {
            out = out.mul(self);
        }
        out
    }

    /// `self(inner(u))`; requires `inner(0) = 0`.
    pub fn compose(&self, inner: &PowerSeries) -> PowerSeries {
        debug_assert!(inner.coeff(0) == 0.0, "inner series must vanish at 0");
        let n = self.len().min(inner.len());
        let mut acc = PowerSeries::zeros(n);
        for &c in self.coeffs.iter().take(n).rev() {
            acc = acc.mul(inner);
            if n > 0 {
                acc.coeffs[0] += c;
            }
        }
        acc
    }

    /// Compositional inverse `b` with `self(b(u)) = u`, solved order by order.
    /// Returns `None` unless `c₀ = 0` and `c₁ ≠ 0`.
    pub fn revert(&self) -> Option<PowerSeries> {
        let n = self.len();
        if n < 2 || self.coeff(0) != 0.0 || self.coeff(1) == 0.0 {
            return None;
        }
        let lead = self.coeff(1);
        let mut inv = PowerSeries::zeros(n);
        inv.coeffs[1] = 1.0 / lead;
        for k in 2..n {
            let residual = self.compose(&inv).coeff(k);
            inv.coeffs[k] = -residual / lead;
        }
        Some(inv)
    }
}

//! Eigenvalue spectra of finite symmetric matrices.

use std::io::{self, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::density::SpectralDensity;
use crate::error::{Error, Result};

/// Where a spectrum came from.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpectrumSource {
    pub layer: Option<usize>,
    pub epoch: Option<usize>,
    pub role: String,
}

impl SpectrumSource {
    pub fn role(role: impl Into<String>) -> Self {
        SpectrumSource {
            role: role.into(),
            ..Default::default()
        }
    }
}

/// Eigenvalues sorted in descending order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalSpectrum {
    eigenvalues: Vec<f64>,
    pub source: SpectrumSource,
}

/// Spread statistics of a spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpreadSummary {
    pub mean: f64,
    pub std: f64,
    pub iqr: f64,
    pub min: f64,
    pub max: f64,
}

impl EmpiricalSpectrum {
    /// Builds a spectrum from raw eigenvalues, sorting them descending.
    pub fn from_eigenvalues(mut eigenvalues: Vec<f64>, source: SpectrumSource) -> Result<Self> {
        if let Some(bad) = eigenvalues.iter().find(|v| !v.is_finite()) {
            return Err(Error::non_finite("eigenvalue", *bad));
        }
        eigenvalues.sort_by(|a, b| b.total_cmp(a));
        Ok(EmpiricalSpectrum {
            eigenvalues,
            source,
        })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Replaces negative round-off with zero, for spectra of positive semidefinite matrices.
    pub fn clamp_nonnegative(&mut self) {
        for v in &mut self.eigenvalues {
            *v = v.max(0.0);
        }
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.eigenvalues.iter().sum::<f64>() / self.len() as f64
    }

    /// Population standard deviation.
    pub fn std_dev(&self) -> f64 {
        let m = self.mean();
        (self.eigenvalues.iter().map(|v| (v - m).powi(2)).sum::<f64>() / self.len() as f64).sqrt()
    }

    fn quantile(&self, q: f64) -> f64 {
        // Ascending view of the descending storage.
        let n = self.len();
        let pos = q * (n - 1) as f64;
        let (i, frac) = (pos.floor() as usize, pos.fract());
        let at = |k: usize| self.eigenvalues[n - 1 - k];
        if i + 1 < n {
            at(i) * (1.0 - frac) + at(i + 1) * frac
        } else {
            at(i)
        }
    }

    pub fn interquartile_range(&self) -> f64 {
        self.quantile(0.75) - self.quantile(0.25)
    }

    pub fn summary(&self) -> SpreadSummary {
        SpreadSummary {
            mean: self.mean(),
            std: self.std_dev(),
            iqr: self.interquartile_range(),
            min: *self.eigenvalues.last().unwrap_or(&f64::NAN),
            max: *self.eigenvalues.first().unwrap_or(&f64::NAN),
        }
    }

    /// `(1/N) Σ λᵢᵏ`.
    pub fn moment(&self, k: u32) -> f64 {
        self.eigenvalues.iter().map(|v| v.powi(k as i32)).sum::<f64>() / self.len() as f64
    }

    /// Kolmogorov–Smirnov distance between the empirical CDF and `density`'s CDF.
    pub fn ks_distance(&self, density: &SpectralDensity) -> f64 {
        let n = self.len() as f64;
        self.eigenvalues
            .iter()
            .rev()
            .enumerate()
            .map(|(i, &v)| {
                let f = density.cdf(v);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max)
    }

    /// Writes `rank,eigenvalue` rows (rank 0 is the largest eigenvalue).
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "rank,eigenvalue")?;
        for (rank, v) in self.eigenvalues.iter().enumerate() {
            writeln!(out, "{rank},{v:e}")?;
        }
        Ok(())
    }
}

/// Eigenvalues of a symmetric matrix. The input is symmetrized as `(M + Mᵀ)/2`
/// before the solve.
pub fn empirical_spectrum(m: &DMatrix<f64>, source: SpectrumSource) -> Result<EmpiricalSpectrum> {
    if !m.is_square() {
        return Err(Error::invalid(format!(
            "spectrum needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.is_empty() {
        return Err(Error::invalid("spectrum of an empty matrix"));
    }
    if let Some((idx, v)) = m.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        let (r, c) = (idx % m.nrows(), idx / m.nrows());
        return Err(Error::non_finite(format!("matrix entry ({r}, {c})"), *v));
    }
    let sym = (m + m.transpose()) * 0.5;
    let values: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    EmpiricalSpectrum::from_eigenvalues(values, source)
}

/// Spectrum of the Gram matrix `A·Aᵀ`.
pub fn gram_spectrum(a: &DMatrix<f64>, source: SpectrumSource) -> Result<EmpiricalSpectrum> {
    let gram = a * a.transpose();
    empirical_spectrum(&gram, source)
}

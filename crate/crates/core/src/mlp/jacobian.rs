use nalgebra::{DMatrix, DVector};

use super::model::MlpModel;
use crate::error::{Error, Result};
use crate::spectral::{gram_spectrum, EmpiricalSpectrum, SpectrumSource};

/// Widest layer for which the dense Jacobian may be assembled.
pub const MAX_DENSE_WIDTH: usize = 2048;

/// One layer's contribution `D_l·W_l`.
#[derive(Debug, Clone)]
pub struct JacobianFactor<'a> {
    /// `φ′(h_l)`, the diagonal of `D_l`.
    pub derivative: DVector<f64>,
    pub weight: &'a DMatrix<f64>,
}

/// Input-output Jacobian of the square layers, `J = D_L W_L ⋯ D_1 W_1`,
/// kept in factored form.
#[derive(Debug, Clone)]
pub struct JacobianProduct<'a> {
    factors: Vec<JacobianFactor<'a>>,
    assembled: Option<DMatrix<f64>>,
}

impl<'a> JacobianProduct<'a> {
    pub fn factors(&self) -> &[JacobianFactor<'a>] {
        &self.factors
    }

    pub fn width(&self) -> usize {
        self.factors[0].weight.nrows()
    }

    /// Dense product, computed once and cached.
    pub fn assemble(&mut self) -> &DMatrix<f64> {
        let factors = &self.factors;
        self.assembled.get_or_insert_with(|| {
            let n = factors[0].weight.ncols();
            let mut j = DMatrix::identity(n, n);
            for f in factors {
                j = f.weight * j;
                for (mut row, d) in j.row_iter_mut().zip(f.derivative.iter()) {
                    row *= *d;
                }
            }
            j
        })
    }

    pub fn assembled(&self) -> Option<&DMatrix<f64>> {
        self.assembled.as_ref()
    }

    /// `J·v` without forming `J`.
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = v.clone();
        for f in &self.factors {
            out = f.weight * out;
            out.component_mul_assign(&f.derivative);
        }
        out
    }

    /// Singular values of the assembled product, descending.
    pub fn singular_values(&mut self) -> Vec<f64> {
        let mut s: Vec<f64> = self.assemble().clone().singular_values().iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }
}

/// Records the Jacobian factors of the square layers at one embedded point
/// `x_0` (a vector of length `width`).
pub fn assemble_jacobian<'a>(model: &'a MlpModel, x0: &DVector<f64>) -> Result<JacobianProduct<'a>> {
    let width = model.width();
    if width > MAX_DENSE_WIDTH {
        return Err(Error::Capacity(format!(
            "width {width} exceeds the dense Jacobian limit of {MAX_DENSE_WIDTH}"
        )));
    }
    if x0.len() != width {
        return Err(Error::invalid(format!("point has length {}, width is {width}", x0.len())));
    }
    let mut x = x0.clone();
    let mut factors = Vec::with_capacity(model.depth());
    for (l, (w, b)) in model.weights.iter().zip(&model.biases).enumerate() {
        let h = w * &x + b;
        if let Some(v) = h.iter().find(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                layer: l + 1,
                detail: format!("non-finite pre-activation ({v})"),
            });
        }
        x = h.map(|v| model.activation.value(v));
        factors.push(JacobianFactor {
            derivative: h.map(|v| model.activation.derivative(v)),
            weight: w,
        });
    }
    Ok(JacobianProduct {
        factors,
        assembled: None,
    })
}

/// Maps an embedded point through the square layers only.
pub fn square_layers_forward(model: &MlpModel, x0: &DVector<f64>) -> DVector<f64> {
    let mut x = x0.clone();
    for (w, b) in model.weights.iter().zip(&model.biases) {
        x = (w * &x + b).map(|v| model.activation.value(v));
    }
    x
}

/// Spectrum of `W_l·W_lᵀ` for every square layer, tagged with layer (1-based) and epoch.
pub fn layer_spectra(model: &MlpModel, epoch: Option<usize>) -> Result<Vec<EmpiricalSpectrum>> {
    model
        .weights
        .iter()
        .enumerate()
        .map(|(l, w)| {
            let mut s = gram_spectrum(
                w,
                SpectrumSource {
                    layer: Some(l + 1),
                    epoch,
                    role: "W W^T".into(),
                },
            )?;
            s.clamp_nonnegative();
            Ok(s)
        })
        .collect()
}

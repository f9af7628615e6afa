//! Static activation normalization and the numerical tooling around it.
//!
//! * [`quadrature`]: rules for integrating against the standard Gaussian measure.
//! * [`activation`]: named activations with analytic derivatives.
//! * [`hermite`]: Hermite polynomials and orthonormal expansions.
//! * [`normalizer`]: the `(α, β, γ)` coefficients and the normalized activation
//!   `f_H(x) = (f(x) − αx − β)/γ`.
//! * [`spectral`]: Marcenko–Pastur law, empirical spectra, Stieltjes/M/S transforms.
//! * [`mlp`]: a from-scratch feedforward network with manual backpropagation,
//!   Jacobian assembly and per-layer spectra.

pub mod activation;
pub mod error;
pub mod hermite;
pub mod mlp;
pub mod normalizer;
pub mod quadrature;
pub mod reference;
pub mod spectral;

pub use activation::Activation;
pub use error::{Error, Result};
pub use hermite::HermiteExpansion;
pub use normalizer::{NormalizationCoefficients, NormalizationContext};
pub use quadrature::QuadratureRule;

//! Random-matrix spectral tools.

pub mod density;
pub mod empirical;
pub mod series;
pub mod transforms;

pub use density::{mp_density, SpectralDensity};
pub use empirical::{empirical_spectrum, gram_spectrum, EmpiricalSpectrum, SpectrumSource, SpreadSummary};
pub use series::PowerSeries;
pub use transforms::{
    cauchy_transform, jacobian_s_transform, m_transform_from_moments, moment_generating_function,
    moments_from_s_transform, multiply_s_series, nonlinearity_moments, nonlinearity_moments_auto,
    s_transform_from_moments, stieltjes_transform, MomentKind, MomentSeries, SpectralMeasure,
};

use thiserror::Error;

/// Errors raised by the numerical layers of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value {value} at {location}")]
    NumericDomain { location: String, value: f64 },

    #[error("unknown activation `{name}`; valid names are: {}", valid.join(", "))]
    UnknownActivation { name: String, valid: Vec<String> },

    #[error("hermite order {0} is above the supported maximum of 64")]
    UnsupportedOrder(usize),

    #[error("degenerate projection: activation has no Hermite content of order >= 2")]
    DegenerateProjection,

    #[error("degenerate activation `{name}`: residual norm {gamma:e} after removing the affine part")]
    DegenerateActivation { name: String, gamma: f64 },

    #[error("series does not converge: |z| = {modulus} is inside the guard radius {guard}")]
    Convergence { modulus: f64, guard: f64 },

    #[error("degenerate transform: {0}")]
    DegenerateTransform(String),

    #[error("divergence at layer {layer}: {detail}")]
    Divergence { layer: usize, detail: String },

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("format error at byte offset {offset}: {detail}")]
    Format { offset: u64, detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn non_finite(location: impl Into<String>, value: f64) -> Self {
        Error::NumericDomain {
            location: location.into(),
            value,
        }
    }
}

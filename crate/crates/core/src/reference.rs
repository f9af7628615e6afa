//! Published normalization coefficients for eight common activations.
//!
//! The published table lists its first two columns in the order (mean, slope),
//! i.e. exchanged relative to `f_H(x) = (f(x) − αx − β)/γ`, where `α` is the slope.
//! [`ReferenceRow::slope`] and [`ReferenceRow::mean`] apply that exchange.

/// One published row, in the column order it was printed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceRow {
    pub name: &'static str,
    pub printed_alpha: f64,
    pub printed_beta: f64,
    pub gamma: f64,
    pub m2_squared: f64,
    pub m4: f64,
}

impl ReferenceRow {
    /// `∫ f′ Dz`, printed in the β column.
    pub fn slope(&self) -> f64 {
        self.printed_beta
    }

    /// `∫ f Dz`, printed in the α column.
    pub fn mean(&self) -> f64 {
        self.printed_alpha
    }

    /// `(slope, mean, gamma, m2², m4)`.
    pub fn as_swapped(&self) -> [f64; 5] {
        [self.slope(), self.mean(), self.gamma, self.m2_squared, self.m4]
    }
}

pub const REFERENCE_TABLE: [ReferenceRow; 8] = [
    row("relu", 0.398942, 0.5, 0.301405, 0.25, 0.5),
    row("softplus", 0.806059, 0.5, 0.146678, 0.0680713, 0.131594),
    row("sigmoid", 0.5, 0.206621, 0.0262071, 0.0680713, 0.131594),
    row("tanh", 0.0, 0.605706, 0.165576, 0.21567, 0.341509),
    row("gelu", 0.325735, 0.5, 0.323942, 0.239622, 0.497433),
    row("swish", 0.206621, 0.5, 0.251164, 0.144007, 0.286581),
    row("elu", 0.160521, 0.761578, 0.197932, 0.44636, 0.594411),
    row("xtanh", 0.605706, 0.0, 0.625308, 0.749437, 1.01452),
];

/// Column labels matching [`ReferenceRow::as_swapped`].
pub const COLUMNS: [&str; 5] = ["alpha", "beta", "gamma", "m2_squared", "m4"];

const fn row(
    name: &'static str,
    printed_alpha: f64,
    printed_beta: f64,
    gamma: f64,
    m2_squared: f64,
    m4: f64,
) -> ReferenceRow {
    ReferenceRow {
        name,
        printed_alpha,
        printed_beta,
        gamma,
        m2_squared,
        m4,
    }
}

pub fn lookup(name: &str) -> Option<&'static ReferenceRow> {
    REFERENCE_TABLE.iter().find(|r| r.name == name)
}

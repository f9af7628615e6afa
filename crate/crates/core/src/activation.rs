//! Registry of scalar activation functions with analytic derivatives.

use std::f64::consts::FRAC_2_SQRT_PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Names accepted by [`get`], in table order followed by the two ReLU variants.
pub const NAMES: [&str; 10] = [
    "relu",
    "softplus",
    "sigmoid",
    "tanh",
    "gelu",
    "swish",
    "elu",
    "xtanh",
    "tilted_relu",
    "abs",
];

/// `√(2/π)`, the Gaussian mean of `|z|`.
pub const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;

/// A named scalar nonlinearity together with its first derivative.
///
/// `kinks` lists the points where the function or its derivative is not smooth;
/// integration code uses them to split the domain.
#[derive(Clone)]
pub struct Activation {
    name: String,
    value: ScalarFn,
    derivative: ScalarFn,
    kinks: Vec<f64>,
    lipschitz_hint: Option<f64>,
}

impl fmt::Debug for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Activation")
            .field("name", &self.name)
            .field("kinks", &self.kinks)
            .field("lipschitz_hint", &self.lipschitz_hint)
            .finish_non_exhaustive()
    }
}

impl Activation {
    pub fn new<V, D>(name: impl Into<String>, value: V, derivative: D) -> Self
    where
        V: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Activation {
            name: name.into(),
            value: Arc::new(value),
            derivative: Arc::new(derivative),
            kinks: Vec::new(),
            lipschitz_hint: None,
        }
    }

    pub fn with_kinks(mut self, kinks: &[f64]) -> Self {
        self.kinks = kinks.to_vec();
        self
    }

    pub fn with_lipschitz(mut self, bound: f64) -> Self {
        self.lipschitz_hint = Some(bound);
        self
    }

    /// The identity map. Not part of the registry; it is the canonical
    /// degenerate (purely affine) input for the normalizer.
    pub fn identity() -> Self {
        Activation::new("identity", |x| x, |_| 1.0).with_lipschitz(1.0)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        (self.value)(x)
    }

    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        (self.derivative)(x)
    }

    pub fn kinks(&self) -> &[f64] {
        &self.kinks
    }

    pub fn is_smooth(&self) -> bool {
        self.kinks.is_empty()
    }

    pub fn lipschitz_hint(&self) -> Option<f64> {
        self.lipschitz_hint
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Looks up a registry activation by name.
pub fn get(name: &str) -> Result<Activation> {
    let act = match name {
        "relu" => Activation::new("relu", |x| x.max(0.0), |x| if x > 0.0 { 1.0 } else { 0.0 })
            .with_kinks(&[0.0])
            .with_lipschitz(1.0),
        "softplus" => Activation::new(
            "softplus",
            |x: f64| x.max(0.0) + (-x.abs()).exp().ln_1p(),
            sigmoid,
        )
        .with_lipschitz(1.0),
        "sigmoid" => Activation::new("sigmoid", sigmoid, |x| {
            let s = sigmoid(x);
            s * (1.0 - s)
        })
        .with_lipschitz(0.25),
        "tanh" => Activation::new("tanh", f64::tanh, |x: f64| 1.0 - x.tanh().powi(2))
            .with_lipschitz(1.0),
        // x·½(1 + erf x), i.e. x·Φ(√2·x).
        "gelu" => Activation::new(
            "gelu",
            |x| 0.5 * x * (1.0 + libm::erf(x)),
            |x| 0.5 * (1.0 + libm::erf(x)) + 0.5 * FRAC_2_SQRT_PI * x * (-x * x).exp(),
        ),
        "swish" => Activation::new("swish", |x| x * sigmoid(x), |x| {
            let s = sigmoid(x);
            s + x * s * (1.0 - s)
        }),
        "elu" => Activation::new(
            "elu",
            |x: f64| if x > 0.0 { x } else { x.exp_m1() },
            |x: f64| if x > 0.0 { 1.0 } else { x.exp() },
        )
        .with_kinks(&[0.0])
        .with_lipschitz(1.0),
        "xtanh" => Activation::new("xtanh", |x: f64| x * x.tanh(), |x: f64| {
            let t = x.tanh();
            t + x * (1.0 - t * t)
        }),
        "tilted_relu" => Activation::new("tilted_relu", |x: f64| x.abs() - SQRT_2_OVER_PI, sign)
            .with_kinks(&[0.0])
            .with_lipschitz(1.0),
        "abs" => Activation::new("abs", f64::abs, sign)
            .with_kinks(&[0.0])
            .with_lipschitz(1.0),
        _ => {
            return Err(Error::UnknownActivation {
                name: name.to_string(),
                valid: NAMES.iter().map(|s| s.to_string()).collect(),
            })
        }
    };
    Ok(act)
}

/// Every registry activation, in [`NAMES`] order.
pub fn all() -> Vec<Activation> {
    NAMES.iter().map(|n| get(n).expect("registry name")).collect()
}

/// Applies `a` componentwise.
pub fn evaluate_elementwise(a: &Activation, v: &[f64]) -> Result<Vec<f64>> {
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            if x.is_finite() {
                Ok(a.value(x))
            } else {
                Err(Error::non_finite(format!("input component {i}"), x))
            }
        })
        .collect()
}

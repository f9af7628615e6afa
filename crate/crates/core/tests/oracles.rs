//! Values frozen from an independent 30-digit adaptive quadrature (mpmath), and
//! closed forms derived by hand.

use std::f64::consts::PI;

use actnorm::activation::{self, SQRT_2_OVER_PI};
use actnorm::hermite;
use actnorm::normalizer::{self, NormalizationContext};
use actnorm::spectral::mp_density;

/// `(name, slope α, mean β, γ, (∫f′²)², ∫f′⁴, ∫f²)` at unit input scale.
const GAUSSIAN_MOMENTS: [(&str, [f64; 6]); 10] = [
    ("relu", [0.5, 0.398942280401433, 0.301405137494543, 0.25, 0.5, 0.5]),
    ("softplus", [0.5, 0.80605918334744, 0.14667822537977, 0.0860712586810242, 0.13159431306638, 0.9212459088593]),
    ("sigmoid", [0.206620964141907, 0.5, 0.0262071180247224, 0.00201028853841288, 0.00228565128667895, 0.293379035858093]),
    ("tanh", [0.605705509602159, 0.0, 0.165575741083742, 0.215670055802376, 0.341509207316664, 0.394294490397841]),
    ("gelu", [0.5, 0.32573500793528, 0.323941569824578, 0.239621937240581, 0.49743274145022, 0.461041436055009]),
    ("swish", [0.5, 0.206620964141907, 0.251163884733496, 0.144006855200782, 0.286580576879615, 0.355775519817352]),
    ("elu", [0.761578291865123, 0.160520572266556, 0.197931980063713, 0.446360284038405, 0.594410641301969, 0.644945417492924]),
    ("xtanh", [0.0, 0.605705509602159, 0.625308485722371, 0.749436869791204, 1.0145178895597, 0.757889866678815]),
    ("tilted_relu", [0.0, 0.0, 0.602810274989087, 1.0, 1.0, 0.363380227632419]),
    ("abs", [0.0, 0.797884560802865, 0.602810274989087, 1.0, 1.0, 1.0]),
];

#[test]
fn coefficients_match_independent_quadrature() {
    let ctx = NormalizationContext::default();
    for (name, [alpha, beta, gamma, m2sq, m4, eta]) in GAUSSIAN_MOMENTS {
        let c = normalizer::coefficients(&activation::get(name).unwrap(), &ctx).unwrap();
        let got = [c.alpha, c.beta, c.gamma, c.m2_squared(), c.m4, c.eta];
        for (label, (g, w)) in ["alpha", "beta", "gamma", "m2_squared", "m4", "eta"]
            .iter()
            .zip(got.iter().zip([alpha, beta, gamma, m2sq, m4, eta]))
        {
            assert!((g - w).abs() < 1e-9, "{name}.{label}: {g} vs {w}");
        }
        assert!((c.xi - alpha * alpha).abs() < 1e-9);
    }
}

#[test]
fn relu_closed_forms() {
    let c = normalizer::coefficients(&activation::get("relu").unwrap(), &NormalizationContext::default()).unwrap();
    assert!((c.beta - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-12);
    assert!((c.gamma - (0.25 - 1.0 / (2.0 * PI)).sqrt()).abs() < 1e-12);
}

/// `∫ max(z,0) ψₙ Dz = He_{n−2}(0)/(√(2π)·√n!)` for `n ≥ 2`.
fn relu_hermite(n: usize) -> f64 {
    match n {
        0 => 1.0 / (2.0 * PI).sqrt(),
        1 => 0.5,
        n if n % 2 == 1 => 0.0,
        n => {
            let mut value = 1.0 / (2.0 * PI).sqrt();
            // He_{n−2}(0) = (−1)^{(n−2)/2} (n−3)!!, divided by √n! incrementally.
            let mut k = 1;
            while k < n - 2 {
                value *= -(k as f64);
                k += 2;
            }
            for j in 1..=n {
                value /= (j as f64).sqrt();
            }
            value
        }
    }
}

#[test]
fn relu_hermite_coefficients_closed_form() {
    let e = hermite::expand_auto(&activation::get("relu").unwrap(), 40).unwrap();
    for n in 0..=40 {
        assert!((e.coefficient(n) - relu_hermite(n)).abs() < 1e-9, "f_{n}: {} vs {}", e.coefficient(n), relu_hermite(n));
    }
}

#[test]
fn normalized_relu_hermite_tail() {
    // Σ_{n=2}^{40} fₙ² / γ² for the closed-form coefficients.
    let gamma_sq = 0.25 - 1.0 / (2.0 * PI);
    let head: f64 = (2..=40).map(|n| relu_hermite(n).powi(2)).sum::<f64>() / gamma_sq;
    let a = activation::get("relu").unwrap();
    let c = normalizer::coefficients(&a, &NormalizationContext::default()).unwrap();
    let e = hermite::expand_auto(&normalizer::normalize(&a, &c).unwrap(), 40).unwrap();
    assert!((e.higher_order_energy() - head).abs() < 1e-8);
    assert!((head - 0.998179221206860).abs() < 1e-12);
}

#[test]
fn tilted_relu_is_the_rescaled_normalized_relu() {
    let a = activation::get("relu").unwrap();
    let c = normalizer::coefficients(&a, &NormalizationContext::default()).unwrap();
    let f = normalizer::normalize(&a, &c).unwrap();
    // Normalized relu = (|x|/2 − 1/√(2π))/γ, Lipschitz 1/(2γ).
    let g = normalizer::rescale(&f, 2.0 * c.gamma);
    for i in 0..=100 {
        let x = -5.0 + 0.1 * i as f64;
        assert!((g.value(x) - (x.abs() - SQRT_2_OVER_PI)).abs() < 1e-12);
    }
}

#[test]
fn mp_unit_cdf_closed_form() {
    // F(1) = 1/3 + √3/(2π), F(2) = 1/2 + 1/π.
    let d = mp_density(1.0).unwrap();
    assert!((d.cdf(1.0) - (1.0 / 3.0 + 3f64.sqrt() / (2.0 * PI))).abs() < 1e-6);
    assert!((d.cdf(2.0) - (0.5 + 1.0 / PI)).abs() < 1e-6);
}

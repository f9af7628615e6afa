use actnorm::mlp::{check_gradients, InitScheme, MlpModel};
use nalgebra::DMatrix;

fn toy_batch() -> (DMatrix<f64>, Vec<usize>) {
    let x = DMatrix::from_fn(8, 4, |i, j| ((3 * i + 5 * j) as f64 * 0.37).sin() * 1.5);
    (x, vec![0, 2, 1, 2])
}

#[test]
fn backprop_matches_finite_differences() {
    let (x, y) = toy_batch();
    for name in ["relu", "tilted_relu", "tanh", "gelu", "normalized_relu", "elu", "abs"] {
        let mut m = MlpModel::init_named(3, 8, 8, 3, name, InitScheme::Gaussian { sigma_w: 1.2 }, 21).unwrap();
        for (l, b) in m.biases.iter_mut().enumerate() {
            b.iter_mut().enumerate().for_each(|(i, v)| *v = 0.05 * (i as f64 - l as f64));
        }
        let report = check_gradients(&m, &x, &y, 100, 5).unwrap();
        assert_eq!(report.checked, 100);
        assert!(report.max_relative_error < 1e-5, "{name}: {report:?}");
    }
}

#[test]
fn orthogonal_init_gradients() {
    let (x, y) = toy_batch();
    let m = MlpModel::init_named(3, 8, 8, 3, "tanh", InitScheme::Orthogonal, 4).unwrap();
    let report = check_gradients(&m, &x, &y, 50, 1).unwrap();
    assert!(report.max_relative_error < 1e-5, "{report:?}");
}

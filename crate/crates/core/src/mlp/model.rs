use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::error::{Error, Result};
use crate::normalizer;

/// Weight initialization family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitScheme {
    /// Haar-distributed orthogonal (or semi-orthogonal) matrices.
    Orthogonal,
    /// IID `N(0, σ_w²/fan_in)` entries.
    Gaussian { sigma_w: f64 },
}

/// Feedforward network: a linear input projection, `depth` square layers
/// `h_l = W_l x_{l−1} + b_l`, `x_l = φ(h_l)`, and a linear softmax head.
///
/// Batches are stored column-wise: a batch of `B` samples is a `dim × B` matrix.
#[derive(Debug, Clone)]
pub struct MlpModel {
    pub activation: Activation,
    pub init: InitScheme,
    /// `width × input_dim`
    pub projection: DMatrix<f64>,
    /// `depth` matrices of size `width × width`
    pub weights: Vec<DMatrix<f64>>,
    pub biases: Vec<DVector<f64>>,
    /// `classes × width`
    pub head: DMatrix<f64>,
    pub head_bias: DVector<f64>,
}

/// Intermediate values of a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub input: DMatrix<f64>,
    /// `x_0 = P·input`
    pub embedded: DMatrix<f64>,
    /// `h_1 … h_L`
    pub pre_activations: Vec<DMatrix<f64>>,
    /// `x_1 … x_L`
    pub post_activations: Vec<DMatrix<f64>>,
    pub logits: DMatrix<f64>,
}

impl ForwardCache {
    /// `x_{l}` for `l = 0..=L`, where `x_0` is the embedded input.
    pub fn layer_input(&self, l: usize) -> &DMatrix<f64> {
        if l == 0 {
            &self.embedded
        } else {
            &self.post_activations[l - 1]
        }
    }
}

/// Parameter gradients, laid out like [`MlpModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub projection: DMatrix<f64>,
    pub weights: Vec<DMatrix<f64>>,
    pub biases: Vec<DVector<f64>>,
    pub head: DMatrix<f64>,
    pub head_bias: DVector<f64>,
}

impl Gradients {
    pub fn zeros_like(model: &MlpModel) -> Self {
        Gradients {
            projection: DMatrix::zeros(model.projection.nrows(), model.projection.ncols()),
            weights: model.weights.iter().map(|w| DMatrix::zeros(w.nrows(), w.ncols())).collect(),
            biases: model.biases.iter().map(|b| DVector::zeros(b.len())).collect(),
            head: DMatrix::zeros(model.head.nrows(), model.head.ncols()),
            head_bias: DVector::zeros(model.head_bias.len()),
        }
    }

    pub fn norm(&self) -> f64 {
        let mut sq = self.projection.norm_squared() + self.head.norm_squared() + self.head_bias.norm_squared();
        sq += self.weights.iter().map(|w| w.norm_squared()).sum::<f64>();
        sq += self.biases.iter().map(|b| b.norm_squared()).sum::<f64>();
        sq.sqrt()
    }
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, std: f64) -> DMatrix<f64> {
    // Filled column by column so the draw order is fixed by the layout.
    DMatrix::from_fn(rows, cols, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        std * z
    })
}

/// Haar-distributed matrix with orthonormal rows or columns (whichever is shorter).
fn orthogonal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    let tall = rows >= cols;
    let (r, c) = if tall { (rows, cols) } else { (cols, rows) };
    let g = gaussian_matrix(rng, r, c, 1.0);
    let qr = g.qr();
    let mut q = qr.q();
    let upper = qr.r();
    for j in 0..c {
        if upper[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    if tall {
        q
    } else {
        q.transpose()
    }
}

fn init_matrix(rng: &mut ChaCha8Rng, init: InitScheme, rows: usize, cols: usize) -> DMatrix<f64> {
    match init {
        InitScheme::Orthogonal => orthogonal_matrix(rng, rows, cols),
        InitScheme::Gaussian { sigma_w } => gaussian_matrix(rng, rows, cols, sigma_w / (cols as f64).sqrt()),
    }
}

fn check_finite(m: &DMatrix<f64>, layer: usize, what: &str) -> Result<()> {
    match m.iter().find(|v| !v.is_finite()) {
        Some(v) => Err(Error::Divergence {
            layer,
            detail: format!("non-finite {what} ({v})"),
        }),
        None => Ok(()),
    }
}

impl MlpModel {
    /// Builds a model with zero biases and weights drawn from `init`, seeded by `seed`.
    ///
    /// The input projection keeps per-component variance: an orthogonal projection
    /// that embeds into a wider space is rescaled by `√(width/input_dim)`.
    pub fn init(
        depth: usize,
        width: usize,
        input_dim: usize,
        classes: usize,
        activation: Activation,
        init: InitScheme,
        seed: u64,
    ) -> Result<Self> {
        if depth < 1 {
            return Err(Error::invalid("depth must be >= 1"));
        }
        if width < 2 {
            return Err(Error::invalid("width must be >= 2"));
        }
        if input_dim < 1 || classes < 2 {
            return Err(Error::invalid("need input_dim >= 1 and classes >= 2"));
        }
        if let InitScheme::Gaussian { sigma_w } = init {
            if !(sigma_w.is_finite() && sigma_w > 0.0) {
                return Err(Error::invalid(format!("sigma_w must be positive, got {sigma_w}")));
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut projection = init_matrix(&mut rng, init, width, input_dim);
        if init == InitScheme::Orthogonal && width > input_dim {
            projection *= (width as f64 / input_dim as f64).sqrt();
        }
        let weights = (0..depth)
            .map(|_| init_matrix(&mut rng, init, width, width))
            .collect();
        let head = init_matrix(&mut rng, init, classes, width);

        Ok(MlpModel {
            activation,
            init,
            projection,
            weights,
            biases: vec![DVector::zeros(width); depth],
            head,
            head_bias: DVector::zeros(classes),
        })
    }

    /// [`MlpModel::init`] with the activation resolved by name (registry names or
    /// `normalized_<name>`).
    pub fn init_named(
        depth: usize,
        width: usize,
        input_dim: usize,
        classes: usize,
        activation: &str,
        init: InitScheme,
        seed: u64,
    ) -> Result<Self> {
        let act = normalizer::resolve_activation(activation)?;
        Self::init(depth, width, input_dim, classes, act, init, seed)
    }

    pub fn depth(&self) -> usize {
        self.weights.len()
    }

    pub fn width(&self) -> usize {
        self.projection.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.projection.ncols()
    }

    pub fn classes(&self) -> usize {
        self.head.nrows()
    }

    pub fn parameter_count(&self) -> usize {
        self.projection.len()
            + self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
            + self.head.len()
            + self.head_bias.len()
    }

    /// Forward pass over a `input_dim × B` batch.
    pub fn forward(&self, batch: &DMatrix<f64>) -> Result<ForwardCache> {
        if batch.nrows() != self.input_dim() {
            return Err(Error::invalid(format!(
                "batch has {} features, model expects {}",
                batch.nrows(),
                self.input_dim()
            )));
        }
        if let Some(v) = batch.iter().find(|v| !v.is_finite()) {
            return Err(Error::non_finite("input batch", *v));
        }

        let embedded = &self.projection * batch;
        let mut pre_activations = Vec::with_capacity(self.depth());
        let mut post_activations: Vec<DMatrix<f64>> = Vec::with_capacity(self.depth());
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let x_prev = if l == 0 { &embedded } else { &post_activations[l - 1] };
            let mut h = w * x_prev;
            for mut col in h.column_iter_mut() {
                col += b;
            }
            check_finite(&h, l + 1, "pre-activation")?;
            let x = h.map(|v| self.activation.value(v));
            check_finite(&x, l + 1, "activation")?;
            pre_activations.push(h);
            post_activations.push(x);
        }
        let last = post_activations.last().unwrap_or(&embedded);
        let mut logits = &self.head * last;
        for mut col in logits.column_iter_mut() {
            col += &self.head_bias;
        }
        check_finite(&logits, self.depth() + 1, "logits")?;

        Ok(ForwardCache {
            input: batch.clone(),
            embedded,
            pre_activations,
            post_activations,
            logits,
        })
    }

    /// Argmax class of each column of the logits.
    pub fn predict(&self, batch: &DMatrix<f64>) -> Result<Vec<usize>> {
        Ok(argmax_columns(&self.forward(batch)?.logits))
    }

    /// Mean softmax cross-entropy and its parameter gradients.
    pub fn backward(&self, cache: &ForwardCache, labels: &[usize]) -> Result<(Gradients, f64)> {
        let batch = cache.logits.ncols();
        if labels.len() != batch {
            return Err(Error::invalid(format!("{} labels for a batch of {batch}", labels.len())));
        }
        if let Some(bad) = labels.iter().find(|&&y| y >= self.classes()) {
            return Err(Error::invalid(format!("label {bad} out of range for {} classes", self.classes())));
        }
        let (probs, loss) = softmax_cross_entropy(&cache.logits, labels);

        // dL/dlogits = (P − Y)/B
        let mut delta = probs;
        for (j, &y) in labels.iter().enumerate() {
            delta[(y, j)] -= 1.0;
        }
        delta /= batch as f64;

        let depth = self.depth();
        let last = cache.layer_input(depth);
        let head = &delta * last.transpose();
        let head_bias = row_sums(&delta);
        let mut upstream = self.head.transpose() * &delta;

        let mut weights = vec![DMatrix::zeros(0, 0); depth];
        let mut biases = vec![DVector::zeros(0); depth];
        for l in (0..depth).rev() {
            let h = &cache.pre_activations[l];
            let local = h.map(|v| self.activation.derivative(v));
            let dh = upstream.component_mul(&local);
            check_finite(&dh, l + 1, "gradient")?;
            weights[l] = &dh * cache.layer_input(l).transpose();
            biases[l] = row_sums(&dh);
            upstream = self.weights[l].transpose() * &dh;
        }
        let projection = &upstream * cache.input.transpose();
        check_finite(&projection, 0, "gradient")?;

        Ok((
            Gradients {
                projection,
                weights,
                biases,
                head,
                head_bias,
            },
            loss,
        ))
    }

    /// Forward then backward on one batch.
    pub fn loss_and_gradients(&self, batch: &DMatrix<f64>, labels: &[usize]) -> Result<(Gradients, f64)> {
        let cache = self.forward(batch)?;
        self.backward(&cache, labels)
    }

    /// Mean cross-entropy without gradients.
    pub fn loss(&self, batch: &DMatrix<f64>, labels: &[usize]) -> Result<f64> {
        let cache = self.forward(batch)?;
        Ok(softmax_cross_entropy(&cache.logits, labels).1)
    }

    /// `θ ← θ − lr·g`
    pub fn apply_update(&mut self, step: &Gradients, lr: f64) {
        let sub = |x: &mut f64, g: f64| *x -= lr * g;
        self.projection.zip_apply(&step.projection, sub);
        for (w, g) in self.weights.iter_mut().zip(&step.weights) {
            w.zip_apply(g, sub);
        }
        for (b, g) in self.biases.iter_mut().zip(&step.biases) {
            b.zip_apply(g, sub);
        }
        self.head.zip_apply(&step.head, sub);
        self.head_bias.zip_apply(&step.head_bias, sub);
    }

    /// Visits every scalar parameter in a fixed order.
    pub fn parameters_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.projection
            .iter_mut()
            .chain(self.weights.iter_mut().flat_map(|w| w.iter_mut()))
            .chain(self.biases.iter_mut().flat_map(|b| b.iter_mut()))
            .chain(self.head.iter_mut())
            .chain(self.head_bias.iter_mut())
    }
}

impl Gradients {
    /// Visits every scalar gradient in the order of [`MlpModel::parameters_mut`].
    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.projection
            .iter()
            .chain(self.weights.iter().flat_map(|w| w.iter()))
            .chain(self.biases.iter().flat_map(|b| b.iter()))
            .chain(self.head.iter())
            .chain(self.head_bias.iter())
    }

    /// `self ← momentum·self + g`
    pub fn accumulate(&mut self, momentum: f64, g: &Gradients) {
        self.projection *= momentum;
        self.projection += &g.projection;
        for (v, x) in self.weights.iter_mut().zip(&g.weights) {
            *v *= momentum;
            *v += x;
        }
        for (v, x) in self.biases.iter_mut().zip(&g.biases) {
            *v *= momentum;
            *v += x;
        }
        self.head *= momentum;
        self.head += &g.head;
        self.head_bias *= momentum;
        self.head_bias += &g.head_bias;
    }
}

fn row_sums(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(m.nrows(), m.row_iter().map(|r| r.sum()))
}

pub(crate) fn argmax_columns(m: &DMatrix<f64>) -> Vec<usize> {
    m.column_iter()
        .map(|c| {
            c.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
                .0
        })
        .collect()
}

/// Column-wise softmax probabilities and the mean cross-entropy.
pub fn softmax_cross_entropy(logits: &DMatrix<f64>, labels: &[usize]) -> (DMatrix<f64>, f64) {
    let mut probs = logits.clone();
    let mut loss = 0.0;
    for (j, mut col) in probs.column_iter_mut().enumerate() {
        let max = col.max();
        col.apply(|v| *v = (*v - max).exp());
        let total = col.sum();
        loss += total.ln() - (logits[(labels[j], j)] - max);
        col /= total;
    }
    (probs, loss / labels.len().max(1) as f64)
}

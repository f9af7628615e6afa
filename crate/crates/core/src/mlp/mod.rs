//! Deep feedforward networks with manual backpropagation.

pub mod checkpoint;
pub mod gradcheck;
pub mod jacobian;
pub mod model;
pub mod train;

pub use gradcheck::{check_gradients, GradientCheck};
pub use jacobian::{assemble_jacobian, layer_spectra, square_layers_forward, JacobianFactor, JacobianProduct};
pub use model::{softmax_cross_entropy, ForwardCache, Gradients, InitScheme, MlpModel};
pub use train::{accuracy, train, train_with, Dataset, EpochRecord, Sgd, TrainOptions, TrainState, TrainingLog};

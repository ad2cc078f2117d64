//! Minimal f64 neural-network engine: dense, convolution, max-pooling,
//! flatten and dropout layers, trained by backpropagation with momentum SGD.
//!
//! Tensors are batch-major: the leading extent is the sample index and the
//! remaining extents are the per-sample shape.

mod checkpoint;
mod layers;
mod loss;
mod network;
mod norm;
mod optim;
mod spec;
mod tensor;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use loss::{cross_entropy, cross_entropy_grad, mse, mse_grad, Loss};
pub use network::{Gradients, Network};
pub use norm::{zscore_apply, zscore_fit, NormStats, STD_EPSILON};
pub use optim::{sgd_step, train, TrainConfig, Velocity};
pub use spec::{Activation, LayerSpec, NetworkSpec};
pub use tensor::Tensor;

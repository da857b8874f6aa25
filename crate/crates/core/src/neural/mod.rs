//! Small dense networks with hand-written reverse-mode gradients, the NAF
//! head built on top of them, optimizers and the checkpoint container.

mod checkpoint;
mod dense;
mod naf;
mod optim;

pub use checkpoint::{Checkpoint, Tensor, CHECKPOINT_MAGIC};
pub use dense::{Activation, DenseNet, MAX_LAYERS, MAX_UNITS};
pub use naf::{NafHead, NafOutput, NafSample, HEAD_OUTPUTS};
pub use optim::{soft_update, Adam, Optimizer, OptimizerKind, Sgd};

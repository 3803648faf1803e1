//! Minimal neural-network building blocks for desk-scale training on CPU.
//!
//! Feature maps use a channel-major `[C, N, H, W]` layout so that a
//! convolution is a single `[C_out, C_in k k] x [C_in k k, N H W]` GEMM whose
//! output is already the next layer's input. Every layer has an inference
//! `forward(&self)` and a `forward_train(&self)` that returns an explicit
//! cache; `backward(&mut self, cache, grad)` accumulates parameter gradients.

mod checkpoint;
mod conv;
mod encoder;
mod error;
mod linear;
mod optim;
mod param;
mod tensor;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use conv::{Conv2d, ConvCache};
pub use encoder::{Encoder, EncoderCache, EncoderSpec};
pub use error::NnError;
pub use linear::{Linear, LinearCache, Mlp, MlpCache};
pub use optim::{LrSchedule, Optimizer, OptimizerSpec};
pub use param::{Module, Param};
pub use tensor::{images_to_tensor, Matrix, Tensor4};

pub type Result<T, E = NnError> = std::result::Result<T, E>;

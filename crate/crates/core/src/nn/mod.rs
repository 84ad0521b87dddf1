//! Minimal differentiable layer engine: dense rank-3 tensors (channels ×
//! height × width), the layer kinds needed by the style network, exact
//! analytic backward passes, SGD with momentum, and a finite-difference
//! gradient checker.
//!
//! All convolutions are "valid" (no implicit padding), which keeps
//! receptive-field and stride arithmetic exact. Inference never mutates a
//! layer; training updates weights and normalization statistics through
//! explicit single-writer calls.

mod layers;
mod optim;
mod tensor;

pub use layers::{ChannelNorm, Conv, DepthwiseSepConv, Layer, MaxPool, NormBatchStats};
pub use optim::{gradient_check, sgd_step, SgdMomentum};
pub use tensor::{scalar, Scalar, Tensor, TensorError};

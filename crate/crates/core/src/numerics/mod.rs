//! Dense tensors, reverse-mode autodiff, the MLP classifier, and its
//! optimizer and parameter averaging.

mod ema;
mod mlp;
mod optim;
mod tape;
mod tensor;

pub use ema::EmaParams;
pub use mlp::{BoundMlp, Layer, MlpParams};
pub use optim::{cosine_lr, sgd_step, OptState, Schedule};
pub use tape::{Tape, Var};
pub use tensor::{argmax, logsumexp, softmax_into, Tensor};

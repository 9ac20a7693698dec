//! Semi-supervised training: batch sampling, weak/strong views, the
//! supervised and gated unsupervised losses, optimizer and EMA stepping, and
//! periodic evaluation.

mod batches;
mod config;
mod loss;
mod run;

pub use batches::{sample_batches, BatchSampler, Batches};
pub use config::{StrategyKind, TrainConfig, CONFIG_KEYS};
pub use loss::{supervised_loss, unsupervised_loss};
pub use run::{evaluate, run, train_step, RunOutput, RunState, StepOutcome, Trainer};

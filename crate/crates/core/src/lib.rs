//! Semi-supervised learning on synthetic data with interchangeable
//! pseudo-label gates.
//!
//! The crate trains small rectifier networks with a weak/strong consistency
//! objective and lets the unlabeled-sample gate be swapped between a
//! confidence threshold, an energy threshold, and a flexible per-class
//! confidence baseline. Everything is seeded and single-threaded per run.
//!
//! - [`numerics`]: tensors, reverse-mode autodiff, MLP, SGD, EMA
//! - [`datagen`]: mixtures, long-tail counts, labeled split, OOD injection, views
//! - [`gating`]: energy and confidence scores, gates, decision dumps
//! - [`trainer`]: losses and the training loop
//! - [`analytics`]: pseudo-label precision/recall, OOD inclusion, records, sweeps
//! - [`cli`]: the `ssl-lab` command line

pub mod analytics;
pub mod cli;
pub mod datagen;
pub mod error;
pub mod gating;
pub mod numerics;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};

//! Synthetic datasets: Gaussian mixtures, long-tail construction, the
//! labeled/unlabeled split, OOD injection, and weak/strong augmentation.

mod augment;
mod benchmark;
mod dataset;
mod longtail;
mod mixture;

pub use augment::{strong_view, weak_view, AugmentSpec};
pub use benchmark::{Benchmark, BenchmarkSpec, OodPlacement};
pub use dataset::{format_f64, Dataset, Origin};
pub use longtail::{labeled_count, longtail_counts, split_labeled, ImbalanceSpec};
pub use mixture::{inject_ood, make_mixture, random_means, MixtureSpec, OodSpec};

//! Exponential long-tail class counts and the per-class labeled split.

use rand::seq::SliceRandom;

use super::dataset::{Dataset, Origin};
use crate::error::{Error, Result};
use crate::rng::{stream, stream_rng};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImbalanceSpec {
    /// Ratio between the most and least frequent class, at least 1.
    pub gamma: f64,
    /// Count of the most frequent class.
    pub n1: usize,
    pub num_classes: usize,
    pub labeled_fraction: f64,
}

/// `N_k = round(n1 · gamma^(-(k-1)/(K-1)))` for `k = 1..=K`, at least 1.
pub fn longtail_counts(spec: &ImbalanceSpec) -> Result<Vec<usize>> {
    let k = spec.num_classes;
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 classes, got {k}")));
    }
    if !(spec.gamma >= 1.0 && spec.gamma.is_finite()) {
        return Err(Error::InvalidArgument(format!("imbalance ratio must be >= 1, got {}", spec.gamma)));
    }
    if spec.n1 == 0 {
        return Err(Error::InvalidArgument("n1 must be positive".into()));
    }
    let n1 = spec.n1 as f64;
    Ok((0..k)
        .map(|i| {
            let exponent = -(i as f64) / (k - 1) as f64;
            ((n1 * spec.gamma.powf(exponent)).round() as usize).max(1)
        })
        .collect())
}

/// Round half up, tolerant of products like `0.3 · 5` landing a hair below
/// the half.
fn round_half_up(x: f64) -> usize {
    (x + 0.5 + 1e-9).floor() as usize
}

/// Number of labeled samples drawn from a class of `n` samples.
pub fn labeled_count(n: usize, fraction: f64) -> usize {
    round_half_up(fraction * n as f64).clamp(1, n.max(1))
}

/// Tags `round(fraction · N_k)` samples (at least one) of every class as
/// labeled and the rest of the in-distribution samples as unlabeled. OOD
/// samples keep their tag.
pub fn split_labeled(ds: Dataset, fraction: f64, seed: u64) -> Result<Dataset> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!("labeled fraction must lie in (0, 1], got {fraction}")));
    }
    let k = ds.num_classes();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, l) in ds.ground_truths().iter().enumerate() {
        if let Some(c) = l {
            by_class[*c].push(i);
        }
    }
    let mut origin: Vec<Origin> = ds
        .origins()
        .iter()
        .map(|&o| if o == Origin::Ood { Origin::Ood } else { Origin::Unlabeled })
        .collect();
    for (c, members) in by_class.iter_mut().enumerate() {
        if members.is_empty() {
            continue;
        }
        let n_lab = labeled_count(members.len(), fraction);
        let mut rng = stream_rng(seed, stream::SPLIT, c as u64);
        members.shuffle(&mut rng);
        for &i in &members[..n_lab] {
            origin[i] = Origin::Labeled;
        }
    }
    ds.with_origins(origin)
}

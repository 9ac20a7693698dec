//! Labeled / unlabeled batch sampling.

use rand::Rng;

use super::config::TrainConfig;
use crate::datagen::{Dataset, Origin};
use crate::error::{Error, Result};
use crate::rng::{stream, stream_rng};

/// Dataset row indices for one iteration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Batches {
    pub labeled: Vec<usize>,
    /// Drawn from unlabeled and OOD-tagged samples alike.
    pub unlabeled: Vec<usize>,
}

/// Index pools of a dataset, built once per run.
#[derive(Clone, Debug)]
pub struct BatchSampler {
    labeled: Vec<usize>,
    unlabeled: Vec<usize>,
}

impl BatchSampler {
    pub fn new(ds: &Dataset) -> Result<Self> {
        let labeled = ds.indices(Origin::Labeled);
        if labeled.is_empty() {
            return Err(Error::InvalidArgument("the dataset has no labeled samples".into()));
        }
        let unlabeled = ds
            .origins()
            .iter()
            .enumerate()
            .filter(|(_, &o)| o != Origin::Labeled)
            .map(|(i, _)| i)
            .collect();
        Ok(BatchSampler { labeled, unlabeled })
    }

    pub fn unlabeled_pool(&self) -> usize {
        self.unlabeled.len()
    }

    /// Uniform draws with replacement, a pure function of `(seed, iter)`.
    pub fn sample(&self, seed: u64, iter: usize, labeled_batch: usize, unlabeled_ratio: usize) -> Batches {
        let mut rng = stream_rng(seed, stream::BATCH, iter as u64);
        let labeled = (0..labeled_batch)
            .map(|_| self.labeled[rng.random_range(0..self.labeled.len())])
            .collect();
        let unlabeled = if self.unlabeled.is_empty() {
            Vec::new()
        } else {
            (0..labeled_batch * unlabeled_ratio)
                .map(|_| self.unlabeled[rng.random_range(0..self.unlabeled.len())])
                .collect()
        };
        Batches { labeled, unlabeled }
    }
}

/// One-shot form of [`BatchSampler::sample`] using the config's batch sizes
/// and seed.
pub fn sample_batches(ds: &Dataset, config: &TrainConfig, iter: usize) -> Result<Batches> {
    Ok(BatchSampler::new(ds)?.sample(config.seed, iter, config.labeled_batch, config.unlabeled_ratio))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{inject_ood, make_mixture, split_labeled, MixtureSpec, OodSpec};

    fn data(n_ood: usize) -> Dataset {
        let spec = MixtureSpec {
            means: vec![vec![0.0], vec![4.0]],
            scales: vec![1.0, 1.0],
        };
        let ds = make_mixture(&spec, &[300, 100], 1).unwrap();
        let ds = split_labeled(ds, 0.1, 1).unwrap();
        let ood = OodSpec {
            mean: vec![50.0],
            scale: 1.0,
        };
        inject_ood(ds, n_ood, &ood, 1).unwrap()
    }

    #[test]
    fn batch_sizes_follow_ratio() {
        let cfg = TrainConfig::default();
        let b = sample_batches(&data(0), &cfg, 0).unwrap();
        assert_eq!(b.labeled.len(), 64);
        assert_eq!(b.unlabeled.len(), 448);
    }

    #[test]
    fn pools_respect_tags_and_determinism() {
        let ds = data(40);
        let cfg = TrainConfig::default();
        let a = sample_batches(&ds, &cfg, 3).unwrap();
        assert!(a.labeled.iter().all(|&i| ds.origin(i) == Origin::Labeled));
        assert!(a.unlabeled.iter().all(|&i| ds.origin(i) != Origin::Labeled));
        assert_eq!(a, sample_batches(&ds, &cfg, 3).unwrap());
        assert_ne!(a, sample_batches(&ds, &cfg, 4).unwrap());
    }

    #[test]
    fn empty_labeled_pool_is_an_error() {
        let ds = data(0);
        let n = ds.len();
        let ds = ds.with_origins(vec![Origin::Unlabeled; n]).unwrap();
        assert!(BatchSampler::new(&ds).is_err());
    }
}

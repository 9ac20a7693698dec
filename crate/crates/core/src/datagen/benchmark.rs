//! End-to-end construction of the synthetic long-tailed benchmark.

use std::fmt;
use std::str::FromStr;

use super::dataset::Dataset;
use super::longtail::{longtail_counts, split_labeled, ImbalanceSpec};
use super::mixture::{inject_ood, make_mixture, random_means, MixtureSpec, OodSpec};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream};

/// Where injected OOD samples are centred.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OodPlacement {
    /// On the mean of the class means, a low-density hole when the class
    /// means surround it.
    Centroid,
    /// Opposite the class centroid, `factor` class scales beyond the
    /// farthest class mean.
    Beyond { factor: f64 },
}

impl fmt::Display for OodPlacement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OodPlacement::Centroid => write!(f, "centroid"),
            OodPlacement::Beyond { factor } => write!(f, "beyond:{factor}"),
        }
    }
}

impl FromStr for OodPlacement {
    type Err = Error;

    /// `centroid` or `beyond:<factor>`.
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "centroid" => Ok(OodPlacement::Centroid),
            Some(("beyond", f)) => f
                .parse()
                .map(|factor| OodPlacement::Beyond { factor })
                .map_err(|_| Error::InvalidArgument(format!("bad OOD factor `{f}`"))),
            _ => Err(Error::InvalidArgument(format!(
                "OOD placement must be `centroid` or `beyond:<factor>`, got `{s}`"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkSpec {
    pub num_classes: usize,
    pub dim: usize,
    /// Distance of every class mean from the origin.
    pub radius: f64,
    /// Standard deviation of every class component.
    pub scale: f64,
    pub gamma: f64,
    pub n1: usize,
    pub labeled_fraction: f64,
    pub n_ood: usize,
    pub ood_placement: OodPlacement,
    /// Standard deviation of the OOD cluster.
    pub ood_scale: f64,
    pub test_per_class: usize,
    pub seed: u64,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        BenchmarkSpec {
            num_classes: 10,
            dim: 8,
            radius: 5.0,
            scale: 1.0,
            gamma: 100.0,
            n1: 2000,
            labeled_fraction: 0.1,
            n_ood: 0,
            ood_placement: OodPlacement::Beyond { factor: 10.0 },
            ood_scale: 1.0,
            test_per_class: 200,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Benchmark {
    pub train: Dataset,
    /// Balanced, fully labeled held-out set from the same mixture.
    pub test: Dataset,
    pub mixture: MixtureSpec,
    pub ood: Option<OodSpec>,
}

impl BenchmarkSpec {
    pub fn imbalance(&self) -> ImbalanceSpec {
        ImbalanceSpec {
            gamma: self.gamma,
            n1: self.n1,
            num_classes: self.num_classes,
            labeled_fraction: self.labeled_fraction,
        }
    }

    pub fn mixture(&self) -> Result<MixtureSpec> {
        if !(self.scale > 0.0) {
            return Err(Error::InvalidArgument(format!("scale must be positive, got {}", self.scale)));
        }
        Ok(MixtureSpec {
            means: random_means(self.num_classes, self.dim, self.radius, self.seed)?,
            scales: vec![self.scale; self.num_classes],
        })
    }

    pub fn ood_spec(&self, mixture: &MixtureSpec) -> Result<OodSpec> {
        let factor = match self.ood_placement {
            OodPlacement::Centroid => return OodSpec::at_centroid(mixture, self.ood_scale),
            OodPlacement::Beyond { factor } => factor,
        };
        let d = mixture.dim();
        let k = mixture.num_classes() as f64;
        let centroid: Vec<f64> = (0..d)
            .map(|j| mixture.means.iter().map(|m| m[j]).sum::<f64>() / k)
            .collect();
        let mut direction: Vec<f64> = centroid.iter().map(|c| -c).collect();
        if direction.iter().all(|&v| v.abs() < 1e-12) {
            direction = vec![0.0; d];
            direction[d - 1] = 1.0;
        }
        OodSpec::beyond(mixture, &direction, factor, self.ood_scale)
    }

    /// Long-tail counts, mixture draw, labeled split, then OOD injection.
    pub fn build(&self) -> Result<Benchmark> {
        let counts = longtail_counts(&self.imbalance())?;
        let mixture = self.mixture()?;
        let ds = make_mixture(&mixture, &counts, self.seed)?;
        let ds = split_labeled(ds, self.labeled_fraction, self.seed)?;
        let (train, ood) = if self.n_ood > 0 {
            let ood = self.ood_spec(&mixture)?;
            (inject_ood(ds, self.n_ood, &ood, self.seed)?, Some(ood))
        } else {
            (ds, None)
        };
        if self.test_per_class == 0 {
            return Err(Error::InvalidArgument("test_per_class must be positive".into()));
        }
        let test = make_mixture(
            &mixture,
            &vec![self.test_per_class; self.num_classes],
            derive_seed(self.seed, stream::TEST, 0),
        )?;
        Ok(Benchmark {
            train,
            test,
            mixture,
            ood,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::Origin;

    #[test]
    fn builds_long_tailed_split_with_ood() {
        let spec = BenchmarkSpec {
            n1: 200,
            gamma: 10.0,
            n_ood: 50,
            ood_placement: OodPlacement::Beyond { factor: 10.0 },
            test_per_class: 20,
            ..BenchmarkSpec::default()
        };
        let b = spec.build().unwrap();
        let counts = longtail_counts(&spec.imbalance()).unwrap();
        assert_eq!(b.train.class_counts(), &counts[..]);
        let (l, u, o) = b.train.partition_sizes();
        assert_eq!(o, 50);
        assert_eq!(l + u + o, b.train.len());
        assert!(b.ood.as_ref().unwrap().separation(&b.mixture) >= 10.0);
        assert_eq!(b.test.len(), 200);
        assert!(b.test.origins().iter().all(|&o| o == Origin::Labeled));
    }

    #[test]
    fn placement_parses() {
        assert_eq!("centroid".parse::<OodPlacement>().unwrap(), OodPlacement::Centroid);
        let p: OodPlacement = "beyond:2.5".parse().unwrap();
        assert_eq!(p, OodPlacement::Beyond { factor: 2.5 });
        assert_eq!(p.to_string().parse::<OodPlacement>().unwrap(), p);
        assert!("beyond".parse::<OodPlacement>().is_err());
        assert!("middle".parse::<OodPlacement>().is_err());
    }

    #[test]
    fn deterministic() {
        let spec = BenchmarkSpec {
            n1: 100,
            test_per_class: 5,
            ..BenchmarkSpec::default()
        };
        let a = spec.build().unwrap();
        let b = spec.build().unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.test, b.test);
    }
}

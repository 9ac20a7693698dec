//! Seeded Gaussian-mixture data and out-of-distribution injection.

use rand::Rng;
use rand_distr::StandardNormal;

use super::dataset::{Dataset, Origin};
use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::rng::{stream, stream_rng};

/// Isotropic Gaussian components, one per class.
#[derive(Clone, Debug, PartialEq)]
pub struct MixtureSpec {
    pub means: Vec<Vec<f64>>,
    pub scales: Vec<f64>,
}

impl MixtureSpec {
    pub fn num_classes(&self) -> usize {
        self.means.len()
    }

    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    fn validate(&self) -> Result<()> {
        let k = self.num_classes();
        if k < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 classes, got {k}")));
        }
        let d = self.dim();
        if d == 0 || self.means.iter().any(|m| m.len() != d) {
            return Err(Error::shape("MixtureSpec", "class means must share one positive dimension"));
        }
        if self.scales.len() != k {
            return Err(Error::shape("MixtureSpec", format!("{k} means but {} scales", self.scales.len())));
        }
        if let Some(s) = self.scales.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidArgument(format!("scales must be positive, got {s}")));
        }
        if self.means.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("class means must be finite".into()));
        }
        Ok(())
    }
}

/// Class means for the synthetic benchmark: `K` points at distance `radius`
/// from the origin, in seeded random directions of a `D`-dimensional space.
pub fn random_means(num_classes: usize, dim: usize, radius: f64, seed: u64) -> Result<Vec<Vec<f64>>> {
    if num_classes < 2 || dim == 0 {
        return Err(Error::InvalidArgument(format!(
            "need K >= 2 and D >= 1, got K={num_classes}, D={dim}"
        )));
    }
    let mut rng = stream_rng(seed, stream::DATA, u64::MAX);
    let means = (0..num_classes)
        .map(|_| {
            let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            v.into_iter().map(|x| radius * x / norm).collect()
        })
        .collect();
    Ok(means)
}

/// Draws `n_per_class[k]` samples from component `k`. Every sample is tagged
/// labeled; [`split_labeled`](super::split_labeled) assigns the partition.
pub fn make_mixture(spec: &MixtureSpec, n_per_class: &[usize], seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let k = spec.num_classes();
    if n_per_class.len() != k {
        return Err(Error::shape(
            "make_mixture",
            format!("{k} classes but {} counts", n_per_class.len()),
        ));
    }
    if n_per_class.contains(&0) {
        return Err(Error::InvalidArgument(format!("per-class counts must be positive, got {n_per_class:?}")));
    }
    let d = spec.dim();
    let n: usize = n_per_class.iter().sum();
    let mut data = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for (class, (&count, (mean, &scale))) in n_per_class
        .iter()
        .zip(spec.means.iter().zip(&spec.scales))
        .enumerate()
    {
        let mut rng = stream_rng(seed, stream::DATA, class as u64);
        for _ in 0..count {
            for &m in mean {
                let z: f64 = rng.sample(StandardNormal);
                data.push(m + scale * z);
            }
            labels.push(Some(class));
        }
    }
    Dataset::new(Tensor::new(vec![n, d], data)?, labels, vec![Origin::Labeled; n], k)
}

/// Distribution of injected out-of-distribution samples.
#[derive(Clone, Debug, PartialEq)]
pub struct OodSpec {
    pub mean: Vec<f64>,
    pub scale: f64,
}

impl OodSpec {
    /// An isotropic cluster whose mean sits `factor` component scales beyond
    /// the farthest class mean, measured from the class centroid along
    /// `direction`. With `factor >= 10` it is at least ten scales from every
    /// class mean.
    pub fn beyond(mixture: &MixtureSpec, direction: &[f64], factor: f64, scale: f64) -> Result<Self> {
        mixture.validate()?;
        let d = mixture.dim();
        if direction.len() != d {
            return Err(Error::shape("OodSpec::beyond", format!("direction has {} entries, expected {d}", direction.len())));
        }
        let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::InvalidArgument("direction must be nonzero".into()));
        }
        let k = mixture.num_classes() as f64;
        let centroid: Vec<f64> = (0..d)
            .map(|j| mixture.means.iter().map(|m| m[j]).sum::<f64>() / k)
            .collect();
        let reach = mixture
            .means
            .iter()
            .map(|m| dist(m, &centroid))
            .fold(0.0, f64::max);
        let max_scale = mixture.scales.iter().copied().fold(0.0, f64::max);
        let offset = reach + factor * max_scale;
        let mean = centroid
            .iter()
            .zip(direction)
            .map(|(c, u)| c + offset * u / norm)
            .collect();
        Ok(OodSpec { mean, scale })
    }

    /// An isotropic cluster centred on the mean of the class means.
    pub fn at_centroid(mixture: &MixtureSpec, scale: f64) -> Result<Self> {
        mixture.validate()?;
        let k = mixture.num_classes() as f64;
        let mean = (0..mixture.dim())
            .map(|j| mixture.means.iter().map(|m| m[j]).sum::<f64>() / k)
            .collect();
        Ok(OodSpec { mean, scale })
    }

    /// Smallest distance from the cluster mean to any class mean, in units of
    /// the largest class scale.
    pub fn separation(&self, mixture: &MixtureSpec) -> f64 {
        let max_scale = mixture.scales.iter().copied().fold(0.0, f64::max);
        mixture
            .means
            .iter()
            .map(|m| dist(m, &self.mean))
            .fold(f64::INFINITY, f64::min)
            / max_scale
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Appends `n_ood` samples from `ood`, tagged out-of-distribution and
/// unlabeled.
pub fn inject_ood(ds: Dataset, n_ood: usize, ood: &OodSpec, seed: u64) -> Result<Dataset> {
    if n_ood == 0 {
        return Ok(ds);
    }
    let d = ds.dim();
    if ood.mean.len() != d {
        return Err(Error::shape("inject_ood", format!("ood mean has {} entries, data has {d}", ood.mean.len())));
    }
    if !(ood.scale >= 0.0 && ood.scale.is_finite()) {
        return Err(Error::InvalidArgument(format!("ood scale must be >= 0, got {}", ood.scale)));
    }
    let (features, mut labels, mut origin, k) = ds.into_parts();
    let n = features.rows();
    let mut data = features.into_data();
    data.reserve(n_ood * d);
    let mut rng = stream_rng(seed, stream::OOD, 0);
    for _ in 0..n_ood {
        for &m in &ood.mean {
            let z: f64 = rng.sample(StandardNormal);
            data.push(m + ood.scale * z);
        }
        labels.push(None);
        origin.push(Origin::Ood);
    }
    Dataset::new(Tensor::new(vec![n + n_ood, d], data)?, labels, origin, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_class() -> MixtureSpec {
        MixtureSpec {
            means: vec![vec![0.0, 0.0], vec![3.0, -1.0]],
            scales: vec![1.0, 1.0],
        }
    }

    #[test]
    fn bookkeeping_and_determinism() {
        let a = make_mixture(&two_class(), &[5, 5], 1).unwrap();
        assert_eq!(a.len(), 10);
        assert_eq!(a.class_counts(), &[5, 5]);
        let b = make_mixture(&two_class(), &[5, 5], 1).unwrap();
        assert_eq!(a.features(), b.features());
        let c = make_mixture(&two_class(), &[5, 5], 2).unwrap();
        assert_ne!(a.features(), c.features());
    }

    #[test]
    fn empirical_means_converge() {
        let ds = make_mixture(&two_class(), &[10_000, 10_000], 3).unwrap();
        for k in 0..2 {
            let rows: Vec<&[f64]> = ds
                .features()
                .row_iter()
                .zip(ds.ground_truths())
                .filter(|(_, l)| **l == Some(k))
                .map(|(r, _)| r)
                .collect();
            for j in 0..2 {
                let m = rows.iter().map(|r| r[j]).sum::<f64>() / rows.len() as f64;
                assert!((m - two_class().means[k][j]).abs() < 0.05, "class {k} dim {j}: {m}");
            }
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(make_mixture(&two_class(), &[5, 0], 1).is_err());
        let mut bad = two_class();
        bad.scales[1] = 0.0;
        assert!(make_mixture(&bad, &[5, 5], 1).is_err());
        let one = MixtureSpec {
            means: vec![vec![0.0]],
            scales: vec![1.0],
        };
        assert!(make_mixture(&one, &[5], 1).is_err());
    }

    #[test]
    fn ood_injection() {
        let ds = make_mixture(&two_class(), &[5, 5], 1).unwrap();
        let ood = OodSpec::beyond(&two_class(), &[0.0, 1.0], 10.0, 1.0).unwrap();
        assert!(ood.separation(&two_class()) >= 10.0);
        let same = inject_ood(ds.clone(), 0, &ood, 9).unwrap();
        assert_eq!(same, ds);
        let more = inject_ood(ds, 100, &ood, 9).unwrap();
        assert_eq!(more.len(), 110);
        assert_eq!(more.partition_sizes(), (10, 0, 100));
        assert_eq!(more.class_counts(), &[5, 5]);
        assert!(more.ground_truths()[10..].iter().all(Option::is_none));
    }

    #[test]
    fn ood_empirical_mean() {
        let ds = make_mixture(&two_class(), &[2, 2], 1).unwrap();
        let ood = OodSpec {
            mean: vec![20.0, -30.0],
            scale: 1.0,
        };
        let ds = inject_ood(ds, 10_000, &ood, 5).unwrap();
        for j in 0..2 {
            let m = ds.features().row_iter().skip(4).map(|r| r[j]).sum::<f64>() / 10_000.0;
            assert!((m - ood.mean[j]).abs() < 0.1);
        }
    }

    #[test]
    fn random_means_have_requested_radius() {
        let m = random_means(10, 6, 4.0, 2).unwrap();
        assert_eq!(m.len(), 10);
        for v in &m {
            let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((r - 4.0).abs() < 1e-12);
        }
        assert_eq!(m, random_means(10, 6, 4.0, 2).unwrap());
    }
}

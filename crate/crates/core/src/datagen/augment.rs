//! Weak and strong views of feature vectors.
//!
//! The weak view adds small isotropic jitter. The strong view adds larger
//! jitter and then zeroes each feature independently, standing in for
//! occlusion-style image augmentation.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::rng::{stream, stream_rng};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AugmentSpec {
    pub weak_sigma: f64,
    pub strong_sigma: f64,
    pub strong_dropout: f64,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        AugmentSpec {
            weak_sigma: 0.1,
            strong_sigma: 0.5,
            strong_dropout: 0.2,
        }
    }
}

impl AugmentSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.weak_sigma >= 0.0 && self.weak_sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("weak_sigma must be >= 0, got {}", self.weak_sigma)));
        }
        if !(self.strong_sigma >= self.weak_sigma && self.strong_sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "strong_sigma ({}) must be >= weak_sigma ({})",
                self.strong_sigma, self.weak_sigma
            )));
        }
        if !(0.0..1.0).contains(&self.strong_dropout) {
            return Err(Error::InvalidArgument(format!(
                "strong_dropout must lie in [0, 1), got {}",
                self.strong_dropout
            )));
        }
        Ok(())
    }
}

fn jitter(x: &Tensor, sigma: f64, rng: &mut impl Rng) -> Tensor {
    let mut out = x.clone();
    out.clear_grad();
    if sigma > 0.0 {
        for v in out.data_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v += sigma * z;
        }
    }
    out
}

/// `x + N(0, weak_sigma²)` noise.
pub fn weak_view(x: &Tensor, spec: &AugmentSpec, seed: u64) -> Result<Tensor> {
    spec.validate()?;
    let mut rng = stream_rng(seed, stream::AUGMENT, 0);
    Ok(jitter(x, spec.weak_sigma, &mut rng))
}

/// `x + N(0, strong_sigma²)` noise, then each entry zeroed with probability
/// `strong_dropout`.
pub fn strong_view(x: &Tensor, spec: &AugmentSpec, seed: u64) -> Result<Tensor> {
    spec.validate()?;
    let mut rng = stream_rng(seed, stream::AUGMENT, 1);
    let mut out = jitter(x, spec.strong_sigma, &mut rng);
    if spec.strong_dropout > 0.0 {
        for v in out.data_mut() {
            if rng.random::<f64>() < spec.strong_dropout {
                *v = 0.0;
            }
        }
    }
    Ok(out)
}

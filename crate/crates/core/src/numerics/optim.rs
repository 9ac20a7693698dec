//! SGD with momentum and L2 weight decay, plus learning-rate schedules.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use super::mlp::MlpParams;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Schedule {
    /// `lr0 · cos(7π · iter / (16 · total_iters))`
    Cosine,
    Constant,
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Schedule::Cosine => "cosine",
            Schedule::Constant => "constant",
        })
    }
}

impl FromStr for Schedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(Schedule::Cosine),
            "constant" => Ok(Schedule::Constant),
            other => Err(Error::InvalidArgument(format!("unknown schedule `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptState {
    lr0: f64,
    momentum: f64,
    weight_decay: f64,
    velocity: Vec<Vec<f64>>,
    iter: usize,
    total_iters: usize,
    schedule: Schedule,
}

impl OptState {
    pub fn new(
        params: &MlpParams,
        lr0: f64,
        momentum: f64,
        weight_decay: f64,
        total_iters: usize,
        schedule: Schedule,
    ) -> Result<Self> {
        if !(lr0 > 0.0 && lr0.is_finite()) {
            return Err(Error::InvalidArgument(format!("lr0 must be positive, got {lr0}")));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::InvalidArgument(format!("momentum must lie in [0, 1), got {momentum}")));
        }
        if !(weight_decay >= 0.0 && weight_decay.is_finite()) {
            return Err(Error::InvalidArgument(format!("weight decay must be >= 0, got {weight_decay}")));
        }
        if total_iters == 0 {
            return Err(Error::InvalidArgument("total_iters must be positive".into()));
        }
        Ok(OptState {
            lr0,
            momentum,
            weight_decay,
            velocity: params.tensors().map(|t| vec![0.0; t.numel()]).collect(),
            iter: 0,
            total_iters,
            schedule,
        })
    }

    pub fn iter(&self) -> usize {
        self.iter
    }

    pub fn total_iters(&self) -> usize {
        self.total_iters
    }

    pub fn schedule(&self) -> Schedule {
        self.schedule
    }

    pub fn velocity(&self) -> &[Vec<f64>] {
        &self.velocity
    }

    /// Learning rate for the current iteration under the configured schedule.
    pub fn lr(&self) -> f64 {
        match self.schedule {
            Schedule::Cosine => cosine_lr(self),
            Schedule::Constant => self.lr0,
        }
    }
}

/// Cosine decay over 7/16 of a cycle: `lr0 · cos(7π · iter / (16 · total))`.
pub fn cosine_lr(state: &OptState) -> f64 {
    state.lr0 * (7.0 * PI * state.iter as f64 / (16.0 * state.total_iters as f64)).cos()
}

/// One momentum step:
/// `v ← μ·v + g + λ·p`, then `p ← p − lr·v`, then `iter += 1`.
pub fn sgd_step(params: &mut MlpParams, state: &mut OptState) -> Result<()> {
    if state.iter >= state.total_iters {
        return Err(Error::Contract(format!(
            "optimizer already ran all {} iterations",
            state.total_iters
        )));
    }
    if state.velocity.len() != params.tensors().count()
        || !params.tensors().zip(&state.velocity).all(|(t, v)| t.numel() == v.len())
    {
        return Err(Error::shape("sgd_step", "velocity buffers do not match parameters"));
    }
    if let Some(i) = params.tensors().position(|t| t.grad().is_none()) {
        return Err(Error::MissingGradient(format!("parameter tensor {i}")));
    }
    let lr = state.lr();
    let (mu, wd) = (state.momentum, state.weight_decay);
    for (t, v) in params.tensors_mut().zip(state.velocity.iter_mut()) {
        let g = t.grad().expect("checked above").to_vec();
        for ((p, vi), gi) in t.data_mut().iter_mut().zip(v.iter_mut()).zip(&g) {
            *vi = mu * *vi + gi + wd * *p;
            *p -= lr * *vi;
        }
    }
    state.iter += 1;
    Ok(())
}

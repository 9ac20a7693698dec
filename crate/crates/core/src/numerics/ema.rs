use super::mlp::MlpParams;
use crate::error::{Error, Result};

/// Exponential moving average of model parameters, used for evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct EmaParams {
    shadow: MlpParams,
    momentum: f64,
}

impl EmaParams {
    /// Starts the shadow at a copy of `live`.
    pub fn new(live: &MlpParams, momentum: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&momentum) {
            return Err(Error::InvalidArgument(format!("EMA momentum must lie in [0, 1], got {momentum}")));
        }
        let mut shadow = live.clone();
        shadow.zero_grad();
        Ok(EmaParams { shadow, momentum })
    }

    pub fn from_shadow(shadow: MlpParams, momentum: f64) -> Result<Self> {
        let mut ema = EmaParams::new(&shadow, momentum)?;
        ema.shadow = shadow;
        ema.shadow.zero_grad();
        Ok(ema)
    }

    pub fn shadow(&self) -> &MlpParams {
        &self.shadow
    }

    pub fn momentum(&self) -> f64 {
        self.momentum
    }

    /// `shadow ← m·shadow + (1 − m)·live`, elementwise.
    pub fn update(&mut self, live: &MlpParams) -> Result<()> {
        if !self.shadow.same_shape(live) {
            return Err(Error::shape(
                "ema_update",
                format!("shadow {:?} vs live {:?}", self.shadow.dims(), live.dims()),
            ));
        }
        let m = self.momentum;
        for (s, l) in self.shadow.tensors_mut().zip(live.tensors()) {
            for (a, &b) in s.data_mut().iter_mut().zip(l.data()) {
                *a = m * *a + (1.0 - m) * b;
            }
        }
        Ok(())
    }
}

//! Supervised and gated unsupervised losses.

use crate::error::{Error, Result};
use crate::gating::{apply_gate, GateStrategy, PseudoLabelDecision};
use crate::numerics::{BoundMlp, MlpParams, Tape, Tensor, Var};

/// Mean cross-entropy of the weak-view logits against the true labels.
pub fn supervised_loss(tape: &mut Tape, model: &BoundMlp, x_weak: &Tensor, labels: &[usize]) -> Result<Var> {
    if labels.is_empty() {
        return Err(Error::InvalidArgument("supervised loss on an empty batch".into()));
    }
    if x_weak.rows() != labels.len() {
        return Err(Error::shape(
            "supervised_loss",
            format!("{} rows for {} labels", x_weak.rows(), labels.len()),
        ));
    }
    let x = tape.constant(x_weak.clone());
    let logits = model.forward(tape, x)?;
    tape.weighted_cross_entropy(logits, labels, &vec![1.0; labels.len()], labels.len() as f64)
}

/// Gated consistency loss
/// `(1/B_u) Σ_b 1[gate(weak_b)] · H(onehot(argmax weak_b), softmax(strong_b))`.
///
/// Pseudo-labels and gate verdicts come from an untaped forward pass of
/// `params` on the weak view, so no gradient reaches them; the loss
/// differentiates through the strong view only. The denominator is the full
/// batch size, so a batch with nothing gated has loss exactly zero.
pub fn unsupervised_loss(
    params: &MlpParams,
    tape: &mut Tape,
    model: &BoundMlp,
    x_weak: &Tensor,
    x_strong: &Tensor,
    strategy: &GateStrategy,
) -> Result<(Var, Vec<PseudoLabelDecision>)> {
    if x_weak.shape() != x_strong.shape() {
        return Err(Error::shape(
            "unsupervised_loss",
            format!("weak {:?} vs strong {:?}", x_weak.shape(), x_strong.shape()),
        ));
    }
    let weak_logits = params.predict(x_weak)?;
    let decisions = apply_gate(&weak_logits, strategy)?;
    let targets: Vec<usize> = decisions.iter().map(|d| d.predicted_class).collect();
    let weights: Vec<f64> = decisions.iter().map(|d| if d.gated { 1.0 } else { 0.0 }).collect();
    let x = tape.constant(x_strong.clone());
    let logits = model.forward(tape, x)?;
    let loss = tape.weighted_cross_entropy(logits, &targets, &weights, decisions.len() as f64)?;
    Ok((loss, decisions))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_net_supervised_loss_is_log_k() {
        let p = MlpParams::zeros(&[3, 4, 10]).unwrap();
        let x = Tensor::from_rows(&[[1.0, 2.0, 3.0], [-1.0, 0.0, 5.0]]).unwrap();
        let mut tape = Tape::new();
        let m = p.bind(&mut tape);
        let l = supervised_loss(&mut tape, &m, &x, &[3, 7]).unwrap();
        assert!((tape.scalar(l) - 10f64.ln()).abs() < 1e-14);
        assert!(supervised_loss(&mut tape, &m, &x, &[]).is_err());
    }

    #[test]
    fn nothing_gated_gives_exact_zero() {
        let p = MlpParams::init(&[2, 5, 3], 1).unwrap();
        let x = Tensor::from_rows(&[[0.5, -1.0], [2.0, 0.1]]).unwrap();
        let mut tape = Tape::new();
        let m = p.bind(&mut tape);
        let (l, d) = unsupervised_loss(&p, &mut tape, &m, &x, &x, &GateStrategy::energy(f64::NEG_INFINITY)).unwrap();
        assert_eq!(tape.scalar(l), 0.0);
        assert!(d.iter().all(|d| !d.gated));
    }
}

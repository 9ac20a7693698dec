//! The hand-built 2-4-3 model and 8-sample weak/strong batch, with
//! per-sample enumeration oracles.

use super::{cross_entropy, first_argmax, naive_forward};
use ssl_lab::gating::GateStrategy;
use ssl_lab::numerics::{Layer, MlpParams, Tape, Tensor};
use ssl_lab::trainer::unsupervised_loss;

pub fn model() -> MlpParams {
    MlpParams::new(vec![
        Layer {
            weight: Tensor::from_rows(&[[1.0, -0.5, 0.25, 2.0], [0.5, 1.5, -1.0, -0.75]]).unwrap(),
            bias: Tensor::new(vec![4], vec![0.1, -0.2, 0.3, 0.0]).unwrap(),
        },
        Layer {
            weight: Tensor::from_rows(&[[1.2, -0.4, 0.3], [-0.6, 0.9, 0.2], [0.5, 0.5, -1.1], [0.8, -0.3, 0.6]])
                .unwrap(),
            bias: Tensor::new(vec![3], vec![0.05, 0.0, -0.05]).unwrap(),
        },
    ])
    .unwrap()
}

pub fn weak() -> Tensor {
    Tensor::from_rows(&[
        [2.0, 0.5],
        [0.1, 0.1],
        [-1.0, 2.5],
        [3.0, -1.0],
        [0.0, 0.0],
        [-2.0, -2.0],
        [1.0, 1.0],
        [0.4, 3.0],
    ])
    .unwrap()
}

pub fn strong() -> Tensor {
    Tensor::from_rows(&[
        [1.8, 0.7],
        [0.0, 0.3],
        [-1.2, 2.2],
        [2.6, -0.8],
        [0.2, -0.1],
        [-1.7, -2.3],
        [1.1, 0.8],
        [0.6, 2.7],
    ])
    .unwrap()
}

pub fn rows(t: &Tensor) -> Vec<Vec<f64>> {
    t.row_iter().map(|r| r.to_vec()).collect()
}

/// `(1/B_u) Σ_b gate_b · H(argmax weak_b, strong_b)`.
pub fn oracle_unsupervised(p: &MlpParams, gate: &dyn Fn(&[f64]) -> bool) -> (f64, usize) {
    let (w, s) = (rows(&weak()), rows(&strong()));
    let mut total = 0.0;
    let mut gated = 0;
    for b in 0..w.len() {
        let fw = naive_forward(p, &w[b]);
        if gate(&fw) {
            gated += 1;
            total += cross_entropy(&naive_forward(p, &s[b]), first_argmax(&fw));
        }
    }
    (total / w.len() as f64, gated)
}

pub fn taped_unsupervised(p: &MlpParams, g: &GateStrategy) -> (f64, usize) {
    let mut tape = Tape::new();
    let m = p.bind(&mut tape);
    let (l, d) = unsupervised_loss(p, &mut tape, &m, &weak(), &strong(), g).unwrap();
    (tape.scalar(l), d.iter().filter(|d| d.gated).count())
}


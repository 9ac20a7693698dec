//! Reverse-mode gradients against central finite differences.

mod common;

use ssl_lab::gating::GateStrategy;
use ssl_lab::numerics::{MlpParams, Tape, Tensor};
use ssl_lab::trainer::{supervised_loss, unsupervised_loss};

#[test]
fn gradients_match_central_differences() {
    let r = common::grad::audit(99, 100, 1e-4);
    assert!(r.failure.is_none(), "{}", r.failure.unwrap());
    assert!(r.checked > 1000, "only {} entries checked", r.checked);
    eprintln!("worst relative error {:e} over {} entries", r.worst, r.checked);
}

#[test]
fn pseudo_label_path_carries_no_gradient() {
    // With identical weak and strong views, a gradient through the weak
    // view would double the result.
    let p = MlpParams::init(&[2, 4, 3], 5).unwrap();
    let x = Tensor::from_rows(&[[0.3, -1.2], [1.5, 0.4], [-0.7, 0.9]]).unwrap();
    let g = GateStrategy::confidence(1e-9);
    let mut tape = Tape::new();
    let m = p.bind(&mut tape);
    let (lu, d) = unsupervised_loss(&p, &mut tape, &m, &x, &x, &g).unwrap();
    tape.backward(lu).unwrap();
    let mut got = p.clone();
    got.zero_grad();
    got.absorb_grads(&tape, &m).unwrap();

    let labels: Vec<usize> = d.iter().map(|d| d.predicted_class).collect();
    let mut tape2 = Tape::new();
    let m2 = p.bind(&mut tape2);
    let ls = supervised_loss(&mut tape2, &m2, &x, &labels).unwrap();
    tape2.backward(ls).unwrap();
    let mut want = p.clone();
    want.zero_grad();
    want.absorb_grads(&tape2, &m2).unwrap();
    for (a, b) in got.tensors().zip(want.tensors()) {
        for (u, v) in a.grad().unwrap().iter().zip(b.grad().unwrap()) {
            assert!((u - v).abs() < 1e-14);
        }
    }
}

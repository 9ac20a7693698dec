//! Loss values on hand-built 8-sample batches against per-sample
//! enumeration.

mod common;

use common::fixtures::{model, oracle_unsupervised, rows, taped_unsupervised, weak};
use common::{cross_entropy, naive_energy, naive_forward, naive_softmax};
use ssl_lab::gating::GateStrategy;
use ssl_lab::numerics::{MlpParams, Tape, Tensor};
use ssl_lab::trainer::supervised_loss;

#[test]
fn forward_matches_naive_loops() {
    let p = MlpParams::init(&[5, 7, 6, 4], 3).unwrap();
    let x = Tensor::new(vec![3, 5], (0..15).map(|i| (i as f64 * 0.37).sin() * 2.0).collect()).unwrap();
    let got = p.predict(&x).unwrap();
    for (i, r) in x.row_iter().enumerate() {
        for (a, b) in got.row(i).iter().zip(naive_forward(&p, r)) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn supervised_loss_is_mean_cross_entropy() {
    let p = model();
    let labels = [0, 1, 2, 0, 1, 2, 0, 1];
    let want: f64 = rows(&weak())
        .iter()
        .zip(labels)
        .map(|(x, y)| cross_entropy(&naive_forward(&p, x), y))
        .sum::<f64>()
        / 8.0;
    let mut tape = Tape::new();
    let m = p.bind(&mut tape);
    let l = supervised_loss(&mut tape, &m, &weak(), &labels).unwrap();
    assert!((tape.scalar(l) - want).abs() < 1e-10);
}

#[test]
fn confidence_gated_loss_divides_by_full_batch() {
    let p = model();
    for tau in [0.4, 0.6, 0.8, 0.95] {
        let (want, n_want) = oracle_unsupervised(&p, &|f| naive_softmax(f).into_iter().fold(0.0, f64::max) >= tau);
        let (got, n_got) = taped_unsupervised(&p, &GateStrategy::confidence(tau));
        assert_eq!(n_got, n_want, "tau_c {tau}");
        assert!((got - want).abs() < 1e-10, "tau_c {tau}: {got} vs {want}");
    }
    // the fixture must exercise partial gating
    let (_, n) = oracle_unsupervised(&p, &|f| naive_softmax(f).into_iter().fold(0.0, f64::max) >= 0.6);
    assert!(n > 0 && n < 8, "{n} gated");
}

#[test]
fn energy_gated_loss_divides_by_full_batch() {
    let p = model();
    for (tau, t) in [(-1.5, 1.0), (-2.5, 1.0), (-4.0, 1.0), (-2.0, 0.5), (-3.0, 2.0)] {
        let (want, n_want) = oracle_unsupervised(&p, &|f| naive_energy(f, t) < tau);
        let g = GateStrategy::Energy { tau_e: tau, temperature: t };
        let (got, n_got) = taped_unsupervised(&p, &g);
        assert_eq!(n_got, n_want, "tau_e {tau}");
        assert!((got - want).abs() < 1e-10, "tau_e {tau}: {got} vs {want}");
    }
    let (_, n) = oracle_unsupervised(&p, &|f| naive_energy(f, 1.0) < -2.5);
    assert!(n > 0 && n < 8, "{n} gated");
}

#[test]
fn nothing_gated_is_exactly_zero() {
    let p = model();
    assert_eq!(taped_unsupervised(&p, &GateStrategy::energy(f64::NEG_INFINITY)), (0.0, 0));
    assert_eq!(taped_unsupervised(&p, &GateStrategy::confidence(1.0)).1, 0);
}

//! Naive reference computations and fixtures shared by the integration
//! tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ssl_lab::gating::energy_score;
use ssl_lab::numerics::{MlpParams, Tensor};

/// Direct triple-loop forward pass: ReLU between layers, raw logits out.
pub fn naive_forward(p: &MlpParams, x: &[f64]) -> Vec<f64> {
    let mut h = x.to_vec();
    let n = p.layers().len();
    for (li, l) in p.layers().iter().enumerate() {
        let (din, dout) = (l.weight.rows(), l.weight.cols());
        let mut out = vec![0.0; dout];
        for j in 0..dout {
            let mut s = l.bias.data()[j];
            for i in 0..din {
                s += h[i] * l.weight.data()[i * dout + j];
            }
            out[j] = if li + 1 < n { s.max(0.0) } else { s };
        }
        h = out;
    }
    h
}

/// Softmax without the max shift; fine for moderate logits.
pub fn naive_softmax(f: &[f64]) -> Vec<f64> {
    let e: Vec<f64> = f.iter().map(|v| v.exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

pub fn naive_energy(f: &[f64], t: f64) -> f64 {
    -t * f.iter().map(|v| (v / t).exp()).sum::<f64>().ln()
}

/// First index of the maximum.
pub fn first_argmax(f: &[f64]) -> usize {
    let m = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    f.iter().position(|&v| v == m).unwrap()
}

pub fn cross_entropy(f: &[f64], y: usize) -> f64 {
    -naive_softmax(f)[y].ln()
}

/// Largest absolute gap between `energy_score` and direct summation over
/// `trials` random logit vectors, cycling K through {2, 10, 100} and T
/// through {0.5, 1, 2}.
pub fn energy_oracle_gap(seed: u64, trials: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for trial in 0..trials {
        let k = [2, 10, 100][trial % 3];
        let t = [0.5, 1.0, 2.0][(trial / 3) % 3];
        let f: Vec<f64> = (0..k).map(|_| rng.random_range(-10.0..10.0)).collect();
        let got = energy_score(&Tensor::new(vec![1, k], f.clone()).unwrap(), t).unwrap()[0];
        worst = worst.max((got - naive_energy(&f, t)).abs());
    }
    worst
}

pub mod fixtures;
pub mod grad;

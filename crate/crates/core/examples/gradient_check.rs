//! Reverse-mode gradients of a small MLP checked against central
//! finite differences.
//!
//! ```text
//! cargo run --release --example gradient_check
//! ```

use ssl_lab::numerics::{MlpParams, Tape, Tensor};

fn loss(params: &MlpParams, x: &Tensor, target: &Tensor) -> ssl_lab::Result<f64> {
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let (logits, _) = params.forward(&mut tape, xv)?;
    let l = tape.cross_entropy(logits, target)?;
    Ok(tape.scalar(l))
}

fn main() -> ssl_lab::Result<()> {
    let mut params = MlpParams::init(&[3, 5, 4], 7)?;
    let x = Tensor::from_rows(&[[0.5, -1.0, 2.0], [1.5, 0.3, -0.7], [-0.2, 0.8, 0.1]])?;
    let target = Tensor::from_rows(&[[1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]])?;

    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let (logits, bound) = params.forward(&mut tape, xv)?;
    let l = tape.cross_entropy(logits, &target)?;
    tape.backward(l)?;
    let analytic: Vec<Vec<f64>> = bound.vars().map(|v| tape.grad(v).unwrap().to_vec()).collect();
    println!("loss {:.6} over {} parameters", tape.scalar(l), params.num_params());

    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for (t, grads) in analytic.iter().enumerate() {
        for i in 0..grads.len() {
            let nudge = |p: &mut MlpParams, d: f64| p.tensors_mut().nth(t).unwrap().data_mut()[i] += d;
            nudge(&mut params, h);
            let up = loss(&params, &x, &target)?;
            nudge(&mut params, -2.0 * h);
            let down = loss(&params, &x, &target)?;
            nudge(&mut params, h);
            let numeric = (up - down) / (2.0 * h);
            let rel = (grads[i] - numeric).abs() / grads[i].abs().max(numeric.abs()).max(1e-8);
            worst = worst.max(rel);
        }
    }
    println!("worst relative error vs finite differences: {worst:.2e}");
    Ok(())
}

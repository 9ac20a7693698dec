//! Random MLP/loss instances and a finite-difference gradient audit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ssl_lab::gating::GateStrategy;
use ssl_lab::numerics::{MlpParams, Tape, Tensor};
use ssl_lab::trainer::{supervised_loss, unsupervised_loss};

const H: f64 = 1e-5;

/// The loss families exercised by the trainer.
#[derive(Clone, Copy, Debug)]
pub enum Loss {
    Supervised,
    GatedConfidence,
    GatedEnergy,
    Combined,
    MeanEnergy,
}

pub struct Instance {
    params: MlpParams,
    x: Tensor,
    x_strong: Tensor,
    labels: Vec<usize>,
    loss: Loss,
    lambda: f64,
}

pub fn random_instance(rng: &mut ChaCha8Rng, i: usize) -> Instance {
    let din = rng.random_range(1..6);
    let k = rng.random_range(2..6);
    let mut dims = vec![din];
    for _ in 0..rng.random_range(0..3) {
        dims.push(rng.random_range(2..7));
    }
    dims.push(k);
    let mut params = MlpParams::init(&dims, rng.random()).unwrap();
    // nonzero biases keep pre-activations off the rectifier kink at 0,
    // which a dead hidden layer would otherwise hit exactly
    for (ti, t) in params.tensors_mut().enumerate() {
        if ti % 2 == 1 {
            t.data_mut().iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
        }
    }
    let b = rng.random_range(2..7);
    let mut rand_t = |rows: usize| {
        Tensor::new(vec![rows, din], (0..rows * din).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap()
    };
    let x = rand_t(b);
    let x_strong = rand_t(b);
    let labels = (0..b).map(|_| rng.random_range(0..k)).collect();
    let loss = [
        Loss::Supervised,
        Loss::GatedConfidence,
        Loss::GatedEnergy,
        Loss::Combined,
        Loss::MeanEnergy,
    ][i % 5];
    Instance {
        params,
        x,
        x_strong,
        labels,
        loss,
        lambda: rng.random_range(0.1..2.0),
    }
}

/// Value of the instance loss at `params`, and optionally its gradients.
pub fn evaluate(inst: &Instance, params: &MlpParams, want_grad: bool) -> (f64, Vec<Vec<f64>>) {
    let mut tape = Tape::new();
    let model = params.bind(&mut tape);
    let loss = match inst.loss {
        Loss::Supervised => supervised_loss(&mut tape, &model, &inst.x, &inst.labels).unwrap(),
        Loss::GatedConfidence => {
            let g = GateStrategy::confidence(0.3);
            unsupervised_loss(params, &mut tape, &model, &inst.x, &inst.x_strong, &g).unwrap().0
        }
        Loss::GatedEnergy => {
            let g = GateStrategy::energy(-0.5);
            unsupervised_loss(params, &mut tape, &model, &inst.x, &inst.x_strong, &g).unwrap().0
        }
        Loss::Combined => {
            let ls = supervised_loss(&mut tape, &model, &inst.x, &inst.labels).unwrap();
            let g = GateStrategy::confidence(0.0 + 1e-9);
            let (lu, _) = unsupervised_loss(params, &mut tape, &model, &inst.x, &inst.x_strong, &g).unwrap();
            let s = tape.scale(lu, inst.lambda);
            tape.add(ls, s).unwrap()
        }
        Loss::MeanEnergy => {
            let x = tape.constant(inst.x.clone());
            let f = model.forward(&mut tape, x).unwrap();
            let lse = tape.logsumexp_rows(f, 0.7).unwrap();
            let m = tape.mean(lse);
            tape.scale(m, -1.0)
        }
    };
    let value = tape.scalar(loss);
    if !want_grad {
        return (value, Vec::new());
    }
    tape.backward(loss).unwrap();
    let mut p = params.clone();
    p.zero_grad();
    p.absorb_grads(&tape, &model).unwrap();
    (value, p.tensors().map(|t| t.grad().unwrap().to_vec()).collect())
}

/// Worst relative error between analytic and central-difference gradients.
pub struct GradReport {
    pub worst: f64,
    pub checked: usize,
    /// First offending entry, if any exceeded `tol`.
    pub failure: Option<String>,
}

pub fn audit(seed: u64, instances: usize, tol: f64) -> GradReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GradReport {
        worst: 0.0,
        checked: 0,
        failure: None,
    };
    for i in 0..instances {
        let inst = random_instance(&mut rng, i);
        let (_, grads) = evaluate(&inst, &inst.params, true);
        for (ti, g) in grads.iter().enumerate() {
            for (j, &a) in g.iter().enumerate() {
                let mut plus = inst.params.clone();
                plus.tensors_mut().nth(ti).unwrap().data_mut()[j] += H;
                let mut minus = inst.params.clone();
                minus.tensors_mut().nth(ti).unwrap().data_mut()[j] -= H;
                let fd = (evaluate(&inst, &plus, false).0 - evaluate(&inst, &minus, false).0) / (2.0 * H);
                let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-7);
                if rel >= tol && report.failure.is_none() {
                    report.failure = Some(format!(
                        "instance {i} ({:?}) tensor {ti} entry {j}: analytic {a:e} vs numeric {fd:e}",
                        inst.loss
                    ));
                }
                report.worst = report.worst.max(rel);
                report.checked += 1;
            }
        }
    }
    report
}

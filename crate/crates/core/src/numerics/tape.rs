//! Reverse-mode automatic differentiation on a linear tape.
//!
//! Operations append nodes in evaluation order, so the tape is already a
//! topological order and `backward` walks it once in reverse.

use super::tensor::{self, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Sum(Var),
    Mean(Var),
    LogSumExp {
        input: Var,
        probs: Vec<f64>,
    },
    CrossEntropy {
        logits: Var,
        targets: Vec<usize>,
        weights: Vec<f64>,
        denom: f64,
        probs: Vec<f64>,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// A recorded computation graph.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    backward_done: bool,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// A differentiable input (parameter).
    pub fn leaf(&mut self, value: Tensor) -> Var {
        let mut value = value;
        value.clear_grad();
        self.push(value, Op::Leaf, true)
    }

    /// An input that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        let mut value = value;
        value.clear_grad();
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Gradient of the last `backward` target with respect to `v`.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].value.grad()
    }

    /// Scalar value of a one-element node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value.data()[0]
    }

    /// Clears every gradient so `backward` may run again.
    pub fn reset(&mut self) {
        for n in &mut self.nodes {
            n.value.clear_grad();
        }
        self.backward_done = false;
    }

    fn matrix(&self, v: Var, ctx: &str) -> Result<(usize, usize)> {
        let t = &self.nodes[v.0].value;
        if !t.is_matrix() {
            return Err(Error::shape(ctx, format!("expected a matrix, got shape {:?}", t.shape())));
        }
        Ok((t.rows(), t.cols()))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (n, k) = self.matrix(a, "matmul lhs")?;
        let (k2, m) = self.matrix(b, "matmul rhs")?;
        if k != k2 {
            return Err(Error::shape("matmul", format!("[{n}, {k}] x [{k2}, {m}]")));
        }
        let mut out = vec![0.0; n * m];
        tensor::matmul_into(self.value(a).data(), self.value(b).data(), &mut out, n, k, m);
        let rg = self.needs(a) || self.needs(b);
        Ok(self.push(Tensor::from_parts(vec![n, m], out), Op::MatMul(a, b), rg))
    }

    /// Adds a bias vector `[m]` to every row of `x` `[n, m]`.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (n, m) = self.matrix(x, "add_bias input")?;
        let b = self.value(bias);
        if b.shape() != [m] {
            return Err(Error::shape("add_bias", format!("bias {:?} for {m} columns", b.shape())));
        }
        let mut out = self.value(x).data().to_vec();
        let bd = b.data();
        for row in out.chunks_exact_mut(m) {
            row.iter_mut().zip(bd).for_each(|(o, v)| *o += v);
        }
        let rg = self.needs(x) || self.needs(bias);
        Ok(self.push(Tensor::from_parts(vec![n, m], out), Op::AddBias(x, bias), rg))
    }

    fn same_shape(&self, a: Var, b: Var, ctx: &str) -> Result<()> {
        if !self.value(a).same_shape(self.value(b)) {
            return Err(Error::shape(
                ctx,
                format!("{:?} vs {:?}", self.value(a).shape(), self.value(b).shape()),
            ));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "add")?;
        let out: Vec<f64> = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x + y)
            .collect();
        let shape = self.value(a).shape().to_vec();
        let rg = self.needs(a) || self.needs(b);
        Ok(self.push(Tensor::from_parts(shape, out), Op::Add(a, b), rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "mul")?;
        let out: Vec<f64> = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x * y)
            .collect();
        let shape = self.value(a).shape().to_vec();
        let rg = self.needs(a) || self.needs(b);
        Ok(self.push(Tensor::from_parts(shape, out), Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let t = self.value(a);
        let out = t.data().iter().map(|x| x * factor).collect();
        let shape = t.shape().to_vec();
        let rg = self.needs(a);
        self.push(Tensor::from_parts(shape, out), Op::Scale(a, factor), rg)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let out = t.data().iter().map(|&x| if x > 0.0 { x } else { 0.0 }).collect();
        let shape = t.shape().to_vec();
        let rg = self.needs(a);
        self.push(Tensor::from_parts(shape, out), Op::Relu(a), rg)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        let rg = self.needs(a);
        self.push(Tensor::scalar(s), Op::Sum(a), rg)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let s = t.data().iter().sum::<f64>() / t.numel() as f64;
        let rg = self.needs(a);
        self.push(Tensor::scalar(s), Op::Mean(a), rg)
    }

    /// Row-wise `T · log Σ_i exp(x_i / T)`, giving a `[n]` vector.
    pub fn logsumexp_rows(&mut self, x: Var, temperature: f64) -> Result<Var> {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::InvalidArgument(format!("temperature must be > 0, got {temperature}")));
        }
        let (n, k) = self.matrix(x, "logsumexp_rows")?;
        let t = self.value(x);
        let mut probs = vec![0.0; n * k];
        let mut out = Vec::with_capacity(n);
        for (row, p) in t.row_iter().zip(probs.chunks_exact_mut(k)) {
            out.push(tensor::logsumexp(row, temperature));
            tensor::softmax_into(row, temperature, p);
        }
        let rg = self.needs(x);
        Ok(self.push(
            Tensor::from_parts(vec![n], out),
            Op::LogSumExp {
                input: x,
                probs,
            },
            rg,
        ))
    }

    /// Mean softmax cross-entropy against a one-hot target matrix.
    pub fn cross_entropy(&mut self, logits: Var, target: &Tensor) -> Result<Var> {
        let (n, k) = self.matrix(logits, "cross_entropy logits")?;
        if target.shape() != [n, k] {
            return Err(Error::shape(
                "cross_entropy target",
                format!("{:?} for logits [{n}, {k}]", target.shape()),
            ));
        }
        let mut classes = Vec::with_capacity(n);
        for (i, row) in target.row_iter().enumerate() {
            let hot: Vec<usize> = row
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(j, _)| j)
                .collect();
            if hot.len() != 1 || row[hot[0]] != 1.0 {
                return Err(Error::Contract(format!("target row {i} is not one-hot: {row:?}")));
            }
            classes.push(hot[0]);
        }
        self.weighted_cross_entropy(logits, &classes, &vec![1.0; n], n as f64)
    }

    /// `Σ_b w_b · H(onehot(t_b), softmax(logits_b)) / denom`.
    ///
    /// Rows with zero weight contribute exactly zero to value and gradient.
    pub fn weighted_cross_entropy(
        &mut self,
        logits: Var,
        targets: &[usize],
        weights: &[f64],
        denom: f64,
    ) -> Result<Var> {
        let (n, k) = self.matrix(logits, "cross_entropy logits")?;
        if targets.len() != n || weights.len() != n {
            return Err(Error::shape(
                "cross_entropy",
                format!("{n} rows, {} targets, {} weights", targets.len(), weights.len()),
            ));
        }
        if let Some(&t) = targets.iter().find(|&&t| t >= k) {
            return Err(Error::Contract(format!("target class {t} out of range for {k} classes")));
        }
        if !(denom > 0.0) {
            return Err(Error::InvalidArgument(format!("denominator must be positive, got {denom}")));
        }
        let t = self.value(logits);
        let mut probs = vec![0.0; n * k];
        let mut total = 0.0;
        for (b, (row, p)) in t.row_iter().zip(probs.chunks_exact_mut(k)).enumerate() {
            tensor::softmax_into(row, 1.0, p);
            if weights[b] != 0.0 {
                let nll = tensor::logsumexp(row, 1.0) - row[targets[b]];
                total += weights[b] * nll;
            }
        }
        let rg = self.needs(logits);
        Ok(self.push(
            Tensor::scalar(total / denom),
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
                weights: weights.to_vec(),
                denom,
                probs,
            },
            rg,
        ))
    }

    /// Propagates `d loss / d node` into the gradient slot of every node that
    /// depends on a leaf.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.backward_done {
            return Err(Error::BackwardTwice);
        }
        if self.value(loss).numel() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            if !self.nodes[idx].requires_grad {
                continue;
            }
            self.propagate(idx, &g, &mut grads);
            self.nodes[idx].value.set_grad(g)?;
        }
        self.backward_done = true;
        Ok(())
    }

    fn propagate(&self, idx: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[idx];
        let mut send = |v: Var, f: &dyn Fn(&mut [f64])| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            let slot = grads[v.0].get_or_insert_with(|| vec![0.0; self.nodes[v.0].value.numel()]);
            f(slot);
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let av = &self.nodes[a.0].value;
                let bv = &self.nodes[b.0].value;
                let (n, k, m) = (av.rows(), av.cols(), bv.cols());
                send(*a, &|s| tensor::matmul_a_bt_acc(g, bv.data(), s, n, k, m));
                send(*b, &|s| tensor::matmul_at_b_acc(av.data(), g, s, n, k, m));
            }
            Op::AddBias(x, bias) => {
                send(*x, &|s| s.iter_mut().zip(g).for_each(|(a, b)| *a += b));
                let m = self.nodes[bias.0].value.numel();
                send(*bias, &|s| {
                    for row in g.chunks_exact(m) {
                        s.iter_mut().zip(row).for_each(|(a, b)| *a += b);
                    }
                });
            }
            Op::Add(a, b) => {
                send(*a, &|s| s.iter_mut().zip(g).for_each(|(x, y)| *x += y));
                send(*b, &|s| s.iter_mut().zip(g).for_each(|(x, y)| *x += y));
            }
            Op::Mul(a, b) => {
                let av = self.nodes[a.0].value.data();
                let bv = self.nodes[b.0].value.data();
                send(*a, &|s| {
                    for ((x, gi), bi) in s.iter_mut().zip(g).zip(bv) {
                        *x += gi * bi;
                    }
                });
                send(*b, &|s| {
                    for ((x, gi), ai) in s.iter_mut().zip(g).zip(av) {
                        *x += gi * ai;
                    }
                });
            }
            Op::Scale(a, f) => {
                send(*a, &|s| s.iter_mut().zip(g).for_each(|(x, y)| *x += y * f));
            }
            Op::Relu(a) => {
                let inp = self.nodes[a.0].value.data();
                send(*a, &|s| {
                    for ((x, gi), &v) in s.iter_mut().zip(g).zip(inp) {
                        if v > 0.0 {
                            *x += gi;
                        }
                    }
                });
            }
            Op::Sum(a) => {
                send(*a, &|s| s.iter_mut().for_each(|x| *x += g[0]));
            }
            Op::Mean(a) => {
                let n = self.nodes[a.0].value.numel() as f64;
                send(*a, &|s| s.iter_mut().for_each(|x| *x += g[0] / n));
            }
            Op::LogSumExp { input, probs } => {
                let k = self.nodes[input.0].value.cols();
                send(*input, &|s| {
                    for ((srow, prow), gi) in s.chunks_exact_mut(k).zip(probs.chunks_exact(k)).zip(g) {
                        srow.iter_mut().zip(prow).for_each(|(x, p)| *x += gi * p);
                    }
                });
            }
            Op::CrossEntropy {
                logits,
                targets,
                weights,
                denom,
                probs,
            } => {
                let k = self.nodes[logits.0].value.cols();
                send(*logits, &|s| {
                    for (b, (srow, prow)) in s.chunks_exact_mut(k).zip(probs.chunks_exact(k)).enumerate() {
                        let w = weights[b];
                        if w == 0.0 {
                            continue;
                        }
                        let c = g[0] * w / denom;
                        for (j, (x, p)) in srow.iter_mut().zip(prow).enumerate() {
                            let y = if j == targets[b] { 1.0 } else { 0.0 };
                            *x += c * (p - y);
                        }
                    }
                });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_gives_unit_gradient() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::new(vec![2, 3], vec![1., -2., 3., 4., 5., -6.]).unwrap());
        let s = tape.sum(x);
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[1.0; 6]);
    }

    #[test]
    fn symmetric_cross_entropy_gradient() {
        let mut tape = Tape::new();
        let z = tape.leaf(Tensor::new(vec![1, 2], vec![0.0, 0.0]).unwrap());
        let target = Tensor::new(vec![1, 2], vec![1.0, 0.0]).unwrap();
        let loss = tape.cross_entropy(z, &target).unwrap();
        assert!((tape.scalar(loss) - 2f64.ln()).abs() < 1e-15);
        tape.backward(loss).unwrap();
        let g = tape.grad(z).unwrap();
        assert!((g[0] + 0.5).abs() < 1e-15 && (g[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn cross_entropy_is_stable_for_large_logits() {
        let mut tape = Tape::new();
        let z = tape.leaf(Tensor::new(vec![1, 2], vec![1000.0, 0.0]).unwrap());
        let target = Tensor::new(vec![1, 2], vec![1.0, 0.0]).unwrap();
        let loss = tape.cross_entropy(z, &target).unwrap();
        let v = tape.scalar(loss);
        assert!(v.is_finite() && v.abs() < 1e-300);
    }

    #[test]
    fn cross_entropy_rejects_soft_targets() {
        let mut tape = Tape::new();
        let z = tape.leaf(Tensor::zeros(vec![1, 2]));
        let soft = Tensor::new(vec![1, 2], vec![0.5, 0.5]).unwrap();
        assert!(matches!(tape.cross_entropy(z, &soft), Err(Error::Contract(_))));
        let zero = Tensor::zeros(vec![1, 2]);
        assert!(matches!(tape.cross_entropy(z, &zero), Err(Error::Contract(_))));
    }

    #[test]
    fn backward_twice_is_an_error_until_reset() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::scalar(3.0));
        let y = tape.mul(x, x).unwrap();
        tape.backward(y).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[6.0]);
        assert!(matches!(tape.backward(y), Err(Error::BackwardTwice)));
        tape.reset();
        tape.backward(y).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[6.0]);
    }

    #[test]
    fn constants_receive_no_gradient() {
        let mut tape = Tape::new();
        let c = tape.constant(Tensor::new(vec![1, 2], vec![1.0, 2.0]).unwrap());
        let w = tape.leaf(Tensor::new(vec![2, 1], vec![3.0, 4.0]).unwrap());
        let y = tape.matmul(c, w).unwrap();
        let s = tape.sum(y);
        tape.backward(s).unwrap();
        assert!(tape.grad(c).is_none());
        assert_eq!(tape.grad(w).unwrap(), &[1.0, 2.0]);
    }

    #[test]
    fn logsumexp_gradient_is_tempered_softmax() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::new(vec![1, 3], vec![1.0, 2.0, 3.0]).unwrap());
        let l = tape.logsumexp_rows(x, 2.0).unwrap();
        let s = tape.sum(l);
        tape.backward(s).unwrap();
        let mut p = [0.0; 3];
        tensor::softmax_into(&[1.0, 2.0, 3.0], 2.0, &mut p);
        for (g, q) in tape.grad(x).unwrap().iter().zip(p) {
            assert!((g - q).abs() < 1e-15);
        }
        assert!(tape.logsumexp_rows(x, 0.0).is_err());
    }

    #[test]
    fn matmul_shape_errors() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::zeros(vec![2, 3]));
        let b = tape.leaf(Tensor::zeros(vec![2, 3]));
        assert!(matches!(tape.matmul(a, b), Err(Error::Shape { .. })));
    }
}

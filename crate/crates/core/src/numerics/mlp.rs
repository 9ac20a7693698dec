//! Fully-connected rectifier classifier.

use std::io::{BufRead, Write};
use std::path::Path;

use rand::Rng;

use super::tape::{Tape, Var};
use super::tensor::{self, Tensor};
use crate::error::{Error, Result};
use crate::rng::{stream, stream_rng};

/// One affine layer: `x · weight + bias`, with `weight` stored `[in, out]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Layer {
    pub fn in_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.cols()
    }
}

/// Layers with a rectifier between consecutive layers and identity at the
/// output, so the last layer produces raw logits.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    layers: Vec<Layer>,
}

/// Parameter nodes of an [`MlpParams`] recorded on a tape.
#[derive(Clone, Debug)]
pub struct BoundMlp {
    layers: Vec<(Var, Var)>,
}

impl MlpParams {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("an MLP needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if !l.weight.is_matrix() || l.bias.shape() != [l.out_dim()] {
                return Err(Error::shape(
                    format!("layer {i}"),
                    format!("weight {:?} with bias {:?}", l.weight.shape(), l.bias.shape()),
                ));
            }
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::shape(
                    format!("layer {}", i + 1),
                    format!(
                        "in-dim {} does not chain with previous out-dim {}",
                        pair[1].in_dim(),
                        pair[0].out_dim()
                    ),
                ));
            }
        }
        Ok(MlpParams { layers })
    }

    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    ///
    /// `dims` lists the input width, hidden widths, and class count.
    pub fn init(dims: &[usize], seed: u64) -> Result<Self> {
        check_dims(dims)?;
        let mut rng = stream_rng(seed, stream::INIT, 0);
        let layers = dims
            .windows(2)
            .map(|w| {
                let limit = (6.0 / (w[0] + w[1]) as f64).sqrt();
                let data = (0..w[0] * w[1]).map(|_| rng.random_range(-limit..limit)).collect();
                Layer {
                    weight: Tensor::from_parts(vec![w[0], w[1]], data),
                    bias: Tensor::zeros(vec![w[1]]),
                }
            })
            .collect();
        MlpParams::new(layers)
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        check_dims(dims)?;
        let layers = dims
            .windows(2)
            .map(|w| Layer {
                weight: Tensor::zeros(vec![w[0], w[1]]),
                bias: Tensor::zeros(vec![w[1]]),
            })
            .collect();
        MlpParams::new(layers)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.layers[0].in_dim()];
        d.extend(self.layers.iter().map(Layer::out_dim));
        d
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn num_classes(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    /// Parameter tensors in a fixed order: `w0, b0, w1, b1, ...`.
    pub fn tensors(&self) -> impl Iterator<Item = &Tensor> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias])
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.layers.iter_mut().flat_map(|l| [&mut l.weight, &mut l.bias])
    }

    pub fn num_params(&self) -> usize {
        self.tensors().map(Tensor::numel).sum()
    }

    pub fn same_shape(&self, other: &MlpParams) -> bool {
        self.layers.len() == other.layers.len()
            && self.tensors().zip(other.tensors()).all(|(a, b)| a.same_shape(b))
    }

    pub fn zero_grad(&mut self) {
        self.tensors_mut().for_each(Tensor::clear_grad);
    }

    /// Records every parameter as a leaf on `tape`.
    pub fn bind(&self, tape: &mut Tape) -> BoundMlp {
        BoundMlp {
            layers: self
                .layers
                .iter()
                .map(|l| (tape.leaf(l.weight.clone()), tape.leaf(l.bias.clone())))
                .collect(),
        }
    }

    /// Taped forward pass; the graph stays on `tape` for `backward`.
    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<(Var, BoundMlp)> {
        let bound = self.bind(tape);
        let out = bound.forward(tape, x)?;
        Ok((out, bound))
    }

    /// Untaped forward pass, bit-identical to the taped one.
    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        if !x.is_matrix() {
            return Err(Error::shape("layer 0", format!("input must be a matrix, got {:?}", x.shape())));
        }
        let n = x.rows();
        let mut h = x.data().to_vec();
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let (k, m) = (l.in_dim(), l.out_dim());
            if h.len() != n * k {
                return Err(Error::shape(
                    format!("layer {i}"),
                    format!("input has {} columns, layer expects {k}", h.len() / n),
                ));
            }
            let mut out = vec![0.0; n * m];
            tensor::matmul_into(&h, l.weight.data(), &mut out, n, k, m);
            for row in out.chunks_exact_mut(m) {
                row.iter_mut().zip(l.bias.data()).for_each(|(o, b)| *o += b);
                if i < last {
                    row.iter_mut().for_each(|o| {
                        if *o <= 0.0 {
                            *o = 0.0
                        }
                    });
                }
            }
            h = out;
        }
        Ok(Tensor::from_parts(vec![n, self.num_classes()], h))
    }

    /// Copies the tape's gradients for `bound` into this model's grad slots.
    pub fn absorb_grads(&mut self, tape: &Tape, bound: &BoundMlp) -> Result<()> {
        if bound.layers.len() != self.layers.len() {
            return Err(Error::shape("absorb_grads", "bound layer count differs"));
        }
        for (l, &(w, b)) in self.layers.iter_mut().zip(&bound.layers) {
            for (t, v) in [(&mut l.weight, w), (&mut l.bias, b)] {
                // a parameter the loss never reached has a zero gradient
                match tape.grad(v) {
                    Some(g) => t.accumulate_grad(g)?,
                    None => t.accumulate_grad(&vec![0.0; t.numel()])?,
                }
            }
        }
        Ok(())
    }
}

impl MlpParams {
    /// Writes a text dump: `layers L`, then per layer a `in out` line, `in`
    /// weight rows, and one bias row, all at 17 significant digits.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "layers {}", self.layers.len())?;
        let line = |v: &[f64]| v.iter().map(|x| format!("{x:.16e}")).collect::<Vec<_>>().join(" ");
        for l in &self.layers {
            writeln!(w, "{} {}", l.in_dim(), l.out_dim())?;
            for row in l.weight.row_iter() {
                writeln!(w, "{}", line(row))?;
            }
            writeln!(w, "{}", line(l.bias.data()))?;
        }
        w.flush()
    }

    pub fn read_from<R: BufRead>(r: R, source_name: &str) -> Result<Self> {
        let lines: Vec<String> = r
            .lines()
            .collect::<std::io::Result<_>>()
            .map_err(|e| Error::parse(source_name, 0, e.to_string()))?;
        let mut it = lines.iter().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let mut next = |what: &str| {
            it.next()
                .map(|(i, l)| (i + 1, l.as_str()))
                .ok_or_else(|| Error::parse(source_name, lines.len(), format!("missing {what}")))
        };
        let nums = |ln: usize, l: &str| -> Result<Vec<f64>> {
            l.split_whitespace()
                .map(|f| f.parse::<f64>().map_err(|_| Error::parse(source_name, ln, format!("bad number `{f}`"))))
                .collect()
        };
        let (ln, head) = next("header")?;
        let count: usize = head
            .strip_prefix("layers ")
            .and_then(|n| n.trim().parse().ok())
            .ok_or_else(|| Error::parse(source_name, ln, format!("expected `layers L`, got `{head}`")))?;
        let mut layers = Vec::with_capacity(count);
        for _ in 0..count {
            let (ln, dims) = next("layer dims")?;
            let d = nums(ln, dims)?;
            let [i, o] = d[..] else {
                return Err(Error::parse(source_name, ln, "expected `in out`"));
            };
            let (i, o) = (i as usize, o as usize);
            let mut data = Vec::with_capacity(i * o);
            for _ in 0..i {
                let (ln, row) = next("weight row")?;
                let v = nums(ln, row)?;
                if v.len() != o {
                    return Err(Error::parse(source_name, ln, format!("expected {o} weights, got {}", v.len())));
                }
                data.extend(v);
            }
            let (ln, row) = next("bias row")?;
            let bias = nums(ln, row)?;
            if bias.len() != o {
                return Err(Error::parse(source_name, ln, format!("expected {o} biases, got {}", bias.len())));
            }
            layers.push(Layer {
                weight: Tensor::new(vec![i, o], data)?,
                bias: Tensor::new(vec![o], bias)?,
            });
        }
        MlpParams::new(layers)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(std::io::BufWriter::new(f)).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        MlpParams::read_from(std::io::BufReader::new(f), &path.display().to_string())
    }
}

impl BoundMlp {
    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let last = self.layers.len() - 1;
        let mut h = x;
        for (i, &(w, b)) in self.layers.iter().enumerate() {
            let xin = tape.value(h);
            let k = tape.value(w).rows();
            if !xin.is_matrix() || xin.cols() != k {
                return Err(Error::shape(
                    format!("layer {i}"),
                    format!("input shape {:?}, layer expects {k} columns", xin.shape()),
                ));
            }
            let z = tape.matmul(h, w)?;
            let z = tape.add_bias(z, b)?;
            h = if i < last { tape.relu(z) } else { z };
        }
        Ok(h)
    }

    pub fn vars(&self) -> impl Iterator<Item = Var> + '_ {
        self.layers.iter().flat_map(|&(w, b)| [w, b])
    }
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 || dims.contains(&0) {
        return Err(Error::InvalidArgument(format!(
            "layer widths must be positive and list at least input and output, got {dims:?}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_dump_round_trips() {
        let p = MlpParams::init(&[3, 5, 2], 11).unwrap();
        let mut buf = Vec::new();
        p.write_to(&mut buf).unwrap();
        assert_eq!(MlpParams::read_from(&buf[..], "mem").unwrap(), p);
        assert!(MlpParams::read_from(&b"layers 1\n2 2\n1 2\n"[..], "mem").is_err());
    }

    #[test]
    fn zero_net_gives_zero_logits() {
        let p = MlpParams::zeros(&[3, 5, 4]).unwrap();
        let x = Tensor::from_rows(&[[1.0, -2.0, 3.0], [0.5, 0.5, 0.5]]).unwrap();
        let y = p.predict(&x).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
        assert_eq!(y.shape(), &[2, 4]);
    }

    #[test]
    fn identity_layer() {
        let p = MlpParams::new(vec![Layer {
            weight: Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap(),
            bias: Tensor::zeros(vec![2]),
        }])
        .unwrap();
        let x = Tensor::from_rows(&[[1.0, 2.0]]).unwrap();
        assert_eq!(p.predict(&x).unwrap().data(), &[1.0, 2.0]);
        let mut tape = Tape::new();
        let xv = tape.constant(x);
        let (y, _) = p.forward(&mut tape, xv).unwrap();
        assert_eq!(tape.value(y).data(), &[1.0, 2.0]);
    }

    #[test]
    fn unchained_layers_rejected() {
        let l0 = Layer {
            weight: Tensor::zeros(vec![2, 3]),
            bias: Tensor::zeros(vec![3]),
        };
        let l1 = Layer {
            weight: Tensor::zeros(vec![4, 2]),
            bias: Tensor::zeros(vec![2]),
        };
        let err = MlpParams::new(vec![l0, l1]).unwrap_err();
        assert!(err.to_string().contains("layer 1"), "{err}");
    }

    #[test]
    fn wrong_input_width_names_layer() {
        let p = MlpParams::zeros(&[3, 4, 2]).unwrap();
        let x = Tensor::zeros(vec![1, 5]);
        let err = p.predict(&x).unwrap_err();
        assert!(err.to_string().contains("layer 0"), "{err}");
        let mut tape = Tape::new();
        let xv = tape.constant(x);
        let err = p.forward(&mut tape, xv).unwrap_err();
        assert!(err.to_string().contains("layer 0"), "{err}");
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = MlpParams::init(&[4, 8, 3], 11).unwrap();
        let b = MlpParams::init(&[4, 8, 3], 11).unwrap();
        let c = MlpParams::init(&[4, 8, 3], 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let limit = (6.0f64 / 12.0).sqrt();
        assert!(a.layers()[0].weight.data().iter().all(|w| w.abs() <= limit));
        assert!(a.layers()[1].bias.data().iter().all(|&b| b == 0.0));
    }

    #[test]
    fn taped_and_untaped_forward_agree_bitwise() {
        let p = MlpParams::init(&[3, 7, 5, 2], 3).unwrap();
        let x = Tensor::from_rows(&[[0.3, -1.2, 2.0], [1.0, 1.0, -0.5]]).unwrap();
        let mut tape = Tape::new();
        let xv = tape.constant(x.clone());
        let (y, _) = p.forward(&mut tape, xv).unwrap();
        assert_eq!(tape.value(y).data(), p.predict(&x).unwrap().data());
    }
}

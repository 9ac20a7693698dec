//! Pseudo-label scoring and gating.
//!
//! Three gates decide which unlabeled samples receive a pseudo-label:
//!
//! - **confidence**: max softmax probability `>= tau_c`;
//! - **energy**: `-T · log Σ_i exp(f_i / T) < tau_e`, i.e. the sample looks
//!   in-distribution to the current classifier;
//! - **flexible**: confidence against a per-class threshold scaled by how many
//!   samples each class has already had pseudo-labeled. This is a simplified
//!   curriculum baseline, not a port of any particular published method.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::numerics::{argmax, logsumexp, softmax_into, Tensor};

/// Energy thresholds used for the 10-class reference settings.
pub const ENERGY_TAU_BALANCED: f64 = -8.0;
pub const ENERGY_TAU_LONG_TAILED: f64 = -9.5;
/// Reference thresholds for 100 classes (balanced, long-tailed).
pub const ENERGY_TAU_BALANCED_100: f64 = -11.0;
pub const ENERGY_TAU_LONG_TAILED_100: f64 = -12.5;
pub const DEFAULT_TAU_C: f64 = 0.95;

#[derive(Clone, Debug, PartialEq)]
pub enum GateStrategy {
    Confidence {
        tau_c: f64,
    },
    Energy {
        tau_e: f64,
        temperature: f64,
    },
    Flexible {
        tau_c: f64,
        /// Gated-sample count per predicted class; must have one entry per
        /// class before gating.
        class_progress: Vec<u64>,
    },
}

impl GateStrategy {
    pub fn confidence(tau_c: f64) -> Self {
        GateStrategy::Confidence { tau_c }
    }

    pub fn energy(tau_e: f64) -> Self {
        GateStrategy::Energy {
            tau_e,
            temperature: 1.0,
        }
    }

    pub fn flexible(tau_c: f64, num_classes: usize) -> Self {
        GateStrategy::Flexible {
            tau_c,
            class_progress: vec![0; num_classes],
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            GateStrategy::Confidence { .. } => "confidence",
            GateStrategy::Energy { .. } => "energy",
            GateStrategy::Flexible { .. } => "flexible",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            GateStrategy::Confidence { tau_c } | GateStrategy::Flexible { tau_c, .. } => {
                if !(*tau_c > 0.0 && *tau_c <= 1.0) {
                    return Err(Error::InvalidArgument(format!("tau_c must lie in (0, 1], got {tau_c}")));
                }
            }
            GateStrategy::Energy { tau_e, temperature } => {
                if tau_e.is_nan() {
                    return Err(Error::InvalidArgument("tau_e is NaN".into()));
                }
                check_temperature(*temperature)?;
            }
        }
        Ok(())
    }

    /// Zeroes the flexible progress counters; no-op for other kinds.
    pub fn reset_progress(&mut self) {
        if let GateStrategy::Flexible { class_progress, .. } = self {
            class_progress.iter_mut().for_each(|p| *p = 0);
        }
    }

    /// Per-class confidence thresholds of the flexible gate:
    /// `tau_c · (p_c + 1) / (max_c p_c + 1)`.
    pub fn flexible_thresholds(&self) -> Option<Vec<f64>> {
        match self {
            GateStrategy::Flexible { tau_c, class_progress } => {
                let max = class_progress.iter().copied().max().unwrap_or(0) as f64;
                Some(
                    class_progress
                        .iter()
                        .map(|&p| tau_c * (p as f64 + 1.0) / (max + 1.0))
                        .collect(),
                )
            }
            _ => None,
        }
    }
}

fn check_temperature(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("temperature must be > 0, got {t}")));
    }
    Ok(())
}

/// Gate verdict for one unlabeled sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PseudoLabelDecision {
    pub sample_index: usize,
    /// Confidence in `[0, 1]` or energy, depending on the strategy.
    pub score: f64,
    pub gated: bool,
    pub predicted_class: usize,
    /// Ground truth for auditing; `None` for out-of-distribution samples.
    pub true_class: Option<usize>,
}

fn check_logits(logits: &Tensor) -> Result<()> {
    if !logits.is_matrix() || logits.cols() < 2 {
        return Err(Error::shape(
            "logits",
            format!("expected [batch, K] with K >= 2, got {:?}", logits.shape()),
        ));
    }
    Ok(())
}

/// `-T · log Σ_i exp(f_i / T)` per row.
pub fn energy_score(logits: &Tensor, temperature: f64) -> Result<Vec<f64>> {
    check_temperature(temperature)?;
    check_logits(logits)?;
    Ok(logits.row_iter().map(|r| -logsumexp(r, temperature)).collect())
}

/// Maximum softmax probability per row.
pub fn confidence_score(logits: &Tensor) -> Result<Vec<f64>> {
    check_logits(logits)?;
    let mut p = vec![0.0; logits.cols()];
    Ok(logits
        .row_iter()
        .map(|r| {
            softmax_into(r, 1.0, &mut p);
            p.iter().copied().fold(0.0, f64::max)
        })
        .collect())
}

/// Scores weak-view logits and applies the gate. `sample_index` is the row
/// position and `true_class` is left empty; callers fill both in.
pub fn apply_gate(logits: &Tensor, strategy: &GateStrategy) -> Result<Vec<PseudoLabelDecision>> {
    strategy.validate()?;
    check_logits(logits)?;
    let predicted: Vec<usize> = logits.row_iter().map(argmax).collect();
    let decide = |scores: Vec<f64>, pass: &dyn Fn(usize, f64) -> bool| -> Vec<PseudoLabelDecision> {
        scores
            .into_iter()
            .enumerate()
            .map(|(i, s)| PseudoLabelDecision {
                sample_index: i,
                score: s,
                gated: pass(i, s),
                predicted_class: predicted[i],
                true_class: None,
            })
            .collect()
    };
    Ok(match strategy {
        GateStrategy::Confidence { tau_c } => decide(confidence_score(logits)?, &|_, s| s >= *tau_c),
        GateStrategy::Energy { tau_e, temperature } => {
            decide(energy_score(logits, *temperature)?, &|_, s| s < *tau_e)
        }
        GateStrategy::Flexible { class_progress, .. } => {
            if class_progress.len() != logits.cols() {
                return Err(Error::Contract(format!(
                    "flexible gate progress has {} entries for {} classes; initialise it first",
                    class_progress.len(),
                    logits.cols()
                )));
            }
            let thresholds = strategy.flexible_thresholds().expect("flexible");
            decide(confidence_score(logits)?, &|i, s| s >= thresholds[predicted[i]])
        }
    })
}

/// Adds each gated decision to its predicted class's progress counter.
pub fn update_flexible_progress(decisions: &[PseudoLabelDecision], strategy: &mut GateStrategy) -> Result<()> {
    let GateStrategy::Flexible { class_progress, .. } = strategy else {
        return Err(Error::Contract(format!(
            "progress update on a {} gate",
            strategy.kind()
        )));
    };
    for d in decisions.iter().filter(|d| d.gated) {
        let slot = class_progress.get_mut(d.predicted_class).ok_or_else(|| {
            Error::Contract(format!("predicted class {} has no progress slot", d.predicted_class))
        })?;
        *slot += 1;
    }
    Ok(())
}

/// Header of the decision dump stream.
pub const DECISION_DUMP_HEADER: &str = "iteration,sample_index,score,gated,predicted_class,true_class";

/// One line of a decision dump.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DumpedDecision {
    pub iteration: usize,
    pub decision: PseudoLabelDecision,
}

/// Appends decisions as delimited text. `true_class` is `-1` for OOD
/// samples; scores carry 17 significant digits.
pub fn write_decisions<W: Write>(mut w: W, iteration: usize, decisions: &[PseudoLabelDecision]) -> std::io::Result<()> {
    for d in decisions {
        let truth = d.true_class.map_or(-1, |t| t as i64);
        writeln!(
            w,
            "{iteration},{},{:.16e},{},{},{truth}",
            d.sample_index,
            d.score,
            u8::from(d.gated),
            d.predicted_class
        )?;
    }
    Ok(())
}

pub fn read_decisions<R: BufRead>(r: R, source_name: &str) -> Result<Vec<DumpedDecision>> {
    let mut out = Vec::new();
    for (ln, line) in r.lines().enumerate() {
        let lineno = ln + 1;
        let line = line.map_err(|e| Error::parse(source_name, lineno, e.to_string()))?;
        let line = line.trim();
        if line.is_empty() || (ln == 0 && line == DECISION_DUMP_HEADER) {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(Error::parse(source_name, lineno, format!("expected 6 fields, got {}", f.len())));
        }
        let bad = |what: &str| Error::parse(source_name, lineno, format!("bad {what} in `{line}`"));
        let iteration = f[0].parse().map_err(|_| bad("iteration"))?;
        let sample_index = f[1].parse().map_err(|_| bad("sample_index"))?;
        let score: f64 = f[2].parse().map_err(|_| bad("score"))?;
        let gated = match f[3] {
            "1" | "true" => true,
            "0" | "false" => false,
            _ => return Err(bad("gated flag")),
        };
        let predicted_class = f[4].parse().map_err(|_| bad("predicted_class"))?;
        let truth: i64 = f[5].parse().map_err(|_| bad("true_class"))?;
        let true_class = match truth {
            -1 => None,
            t if t >= 0 => Some(t as usize),
            _ => return Err(bad("true_class")),
        };
        out.push(DumpedDecision {
            iteration,
            decision: PseudoLabelDecision {
                sample_index,
                score,
                gated,
                predicted_class,
                true_class,
            },
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(r: &[&[f64]]) -> Tensor {
        Tensor::from_rows(r).unwrap()
    }

    #[test]
    fn energy_of_uniform_logits() {
        let z = Tensor::zeros(vec![1, 10]);
        let e = energy_score(&z, 1.0).unwrap();
        assert!((e[0] + 10f64.ln()).abs() < 1e-12);
        let c = 2.5;
        let z = Tensor::full(vec![1, 10], c);
        let e = energy_score(&z, 1.0).unwrap();
        assert!((e[0] - (-c - 10f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn energy_rejects_bad_temperature() {
        let z = Tensor::zeros(vec![1, 3]);
        assert!(energy_score(&z, 0.0).is_err());
        assert!(energy_score(&z, -1.0).is_err());
    }

    #[test]
    fn confidence_values() {
        let c = confidence_score(&Tensor::zeros(vec![1, 10])).unwrap();
        assert!((c[0] - 0.1).abs() < 1e-15);
        let c = confidence_score(&rows(&[&[10.0, 0.0]])).unwrap();
        assert!((c[0] - 1.0 / (1.0 + (-10f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn gate_examples() {
        let z = Tensor::zeros(vec![1, 10]);
        let d = apply_gate(&z, &GateStrategy::energy(-2.0)).unwrap();
        assert!(d[0].gated);
        assert_eq!(d[0].predicted_class, 0);
        let d = apply_gate(&z, &GateStrategy::confidence(0.95)).unwrap();
        assert!(!d[0].gated);

        let z = rows(&[&[1.0, -3.0, 0.5], &[40.0, 2.0, -7.0], &[-50.0, -60.0, -55.0]]);
        let none = apply_gate(&z, &GateStrategy::energy(f64::NEG_INFINITY)).unwrap();
        assert!(none.iter().all(|d| !d.gated));
        let all = apply_gate(&z, &GateStrategy::energy(f64::INFINITY)).unwrap();
        assert!(all.iter().all(|d| d.gated));
    }

    #[test]
    fn comparison_directions_at_equality() {
        let z = rows(&[&[0.0, 0.0]]);
        let d = apply_gate(&z, &GateStrategy::confidence(0.5)).unwrap();
        assert!(d[0].gated);
        let e = energy_score(&z, 1.0).unwrap()[0];
        let d = apply_gate(&z, &GateStrategy::energy(e)).unwrap();
        assert!(!d[0].gated);
    }

    #[test]
    fn flexible_requires_initialised_progress() {
        let z = Tensor::zeros(vec![2, 3]);
        let s = GateStrategy::Flexible {
            tau_c: 0.9,
            class_progress: vec![],
        };
        assert!(matches!(apply_gate(&z, &s), Err(Error::Contract(_))));
    }

    #[test]
    fn flexible_progress_counts_gated_only() {
        let mut s = GateStrategy::flexible(0.95, 4);
        let mk = |c, g| PseudoLabelDecision {
            sample_index: 0,
            score: 0.0,
            gated: g,
            predicted_class: c,
            true_class: None,
        };
        update_flexible_progress(&[], &mut s).unwrap();
        assert_eq!(s, GateStrategy::flexible(0.95, 4));
        update_flexible_progress(&[mk(2, true), mk(2, true), mk(2, true), mk(1, false)], &mut s).unwrap();
        let GateStrategy::Flexible { class_progress, .. } = &s else { unreachable!() };
        assert_eq!(class_progress, &[0, 0, 3, 0]);
        let mut conf = GateStrategy::confidence(0.9);
        assert!(update_flexible_progress(&[], &mut conf).is_err());
    }

    #[test]
    fn flexible_thresholds_equal_tau_at_uniform_progress() {
        let s = GateStrategy::Flexible {
            tau_c: 0.9,
            class_progress: vec![7, 7, 7],
        };
        assert_eq!(s.flexible_thresholds().unwrap(), vec![0.9; 3]);
        let s = GateStrategy::Flexible {
            tau_c: 0.9,
            class_progress: vec![9, 4, 0],
        };
        let t = s.flexible_thresholds().unwrap();
        assert!((t[0] - 0.9).abs() < 1e-15 && (t[1] - 0.45).abs() < 1e-15 && (t[2] - 0.09).abs() < 1e-15);
    }

    #[test]
    fn decision_dump_round_trip() {
        let ds = vec![
            PseudoLabelDecision {
                sample_index: 4,
                score: -9.123456789012345,
                gated: true,
                predicted_class: 2,
                true_class: Some(2),
            },
            PseudoLabelDecision {
                sample_index: 17,
                score: 0.1,
                gated: false,
                predicted_class: 0,
                true_class: None,
            },
        ];
        let mut buf = format!("{DECISION_DUMP_HEADER}\n").into_bytes();
        write_decisions(&mut buf, 12, &ds).unwrap();
        let back = read_decisions(&buf[..], "mem").unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].iteration, 12);
        assert_eq!(back[0].decision, ds[0]);
        assert_eq!(back[1].decision, ds[1]);
        assert!(read_decisions(&b"1,2,3\n"[..], "mem").is_err());
    }
}

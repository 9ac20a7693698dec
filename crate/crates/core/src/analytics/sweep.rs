//! Grids of full training runs over one hyperparameter and several seeds.

use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::gating::{
    DEFAULT_TAU_C, ENERGY_TAU_BALANCED, ENERGY_TAU_BALANCED_100, ENERGY_TAU_LONG_TAILED,
    ENERGY_TAU_LONG_TAILED_100,
};
use crate::trainer::{self, TrainConfig};

/// Keys a sweep may vary.
pub const SWEEPABLE: &[&str] = &["tau_e", "tau_c", "temperature", "lambda_u", "weight_decay", "lr0"];

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub seed: u64,
    /// Final EMA accuracy; `None` when the run failed.
    pub acc_ema: Option<f64>,
    pub error: Option<String>,
    /// The value is one of the reference defaults for this parameter.
    pub reference_default: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepStat {
    pub value: f64,
    /// Successful runs.
    pub n: usize,
    pub mean: Option<f64>,
    /// Sample standard deviation (n − 1 denominator); needs two runs.
    pub std: Option<f64>,
    pub reference_default: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepTable {
    pub param: String,
    pub rows: Vec<SweepRow>,
    pub stats: Vec<SweepStat>,
}

/// Whether `value` is a reference default of `param`.
pub fn is_reference_default(param: &str, value: f64) -> bool {
    match param {
        "tau_e" => [
            ENERGY_TAU_BALANCED,
            ENERGY_TAU_LONG_TAILED,
            ENERGY_TAU_BALANCED_100,
            ENERGY_TAU_LONG_TAILED_100,
        ]
        .contains(&value),
        "tau_c" => value == DEFAULT_TAU_C,
        "temperature" => value == 1.0,
        _ => false,
    }
}

pub fn mean_std(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = (xs.len() >= 2).then(|| (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    (Some(mean), std)
}

/// Runs one training per `(value, seed)` with `param` set to `value` and the
/// run seed set to `seed`. Failed runs are kept as rows with an error.
pub fn threshold_sweep(
    base: &TrainConfig,
    param: &str,
    values: &[f64],
    seeds: &[u64],
    train: &Dataset,
    test: &Dataset,
    jobs: usize,
) -> Result<SweepTable> {
    if !SWEEPABLE.contains(&param) {
        return Err(Error::InvalidArgument(format!(
            "`{param}` is not sweepable; choose one of {}",
            SWEEPABLE.join(", ")
        )));
    }
    if values.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidArgument("a sweep needs at least one value and one seed".into()));
    }
    let mut configs = Vec::with_capacity(values.len() * seeds.len());
    for &v in values {
        for &s in seeds {
            let mut c = base.clone();
            c.set(param, &v.to_string())?;
            c.seed = s;
            configs.push((v, s, c));
        }
    }

    let results: Mutex<Vec<Option<SweepRow>>> = Mutex::new(vec![None; configs.len()]);
    let next = AtomicUsize::new(0);
    let workers = jobs.clamp(1, configs.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some((value, seed, cfg)) = configs.get(i) else { break };
                let outcome = trainer::run(cfg, train, test);
                let row = SweepRow {
                    value: *value,
                    seed: *seed,
                    acc_ema: outcome.as_ref().ok().map(|o| o.summary.final_acc_ema),
                    error: outcome.err().map(|e| e.to_string()),
                    reference_default: is_reference_default(param, *value),
                };
                results.lock().expect("sweep results lock")[i] = Some(row);
            });
        }
    });
    let rows: Vec<SweepRow> = results
        .into_inner()
        .expect("sweep results lock")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect();

    let mut stats = Vec::new();
    for &v in values {
        if stats.iter().any(|s: &SweepStat| s.value == v) {
            continue;
        }
        let accs: Vec<f64> = rows.iter().filter(|r| r.value == v).filter_map(|r| r.acc_ema).collect();
        let (mean, std) = mean_std(&accs);
        stats.push(SweepStat {
            value: v,
            n: accs.len(),
            mean,
            std,
            reference_default: is_reference_default(param, v),
        });
    }
    Ok(SweepTable {
        param: param.to_string(),
        rows,
        stats,
    })
}

impl SweepTable {
    /// Long format: one line per run.
    pub fn rows_csv(&self) -> String {
        let mut s = format!("{},seed,acc_ema,status,reference_default\n", self.param);
        for r in &self.rows {
            let acc = r.acc_ema.map_or_else(|| "undef".into(), |a| format!("{a:.16e}"));
            let status = if r.error.is_some() { "failed" } else { "ok" };
            let _ = writeln!(s, "{},{},{acc},{status},{}", r.value, r.seed, u8::from(r.reference_default));
        }
        s
    }

    /// Per-value mean and standard deviation.
    pub fn stats_csv(&self) -> String {
        let mut s = format!("{},n,mean_acc_ema,std_acc_ema,reference_default\n", self.param);
        let f = |v: Option<f64>| v.map_or_else(|| "undef".into(), |x| format!("{x:.16e}"));
        for st in &self.stats {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                st.value,
                st.n,
                f(st.mean),
                f(st.std),
                u8::from(st.reference_default)
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_sample_std() {
        let (m, s) = mean_std(&[0.5, 0.7, 0.9]);
        assert!((m.unwrap() - 0.7).abs() < 1e-15);
        assert!((s.unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(mean_std(&[0.4]), (Some(0.4), None));
        assert_eq!(mean_std(&[]), (None, None));
    }

    #[test]
    fn reference_defaults() {
        assert!(is_reference_default("tau_e", -8.0));
        assert!(is_reference_default("tau_e", -9.5));
        assert!(!is_reference_default("tau_e", -7.5));
        assert!(is_reference_default("tau_c", 0.95));
        assert!(!is_reference_default("lambda_u", 1.0));
    }
}

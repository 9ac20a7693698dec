//! Run configuration and its flat `key = value` text format.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::datagen::AugmentSpec;
use crate::error::{Error, Result};
use crate::gating::GateStrategy;
use crate::numerics::Schedule;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StrategyKind {
    Confidence,
    Energy,
    Flexible,
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StrategyKind::Confidence => "confidence",
            StrategyKind::Energy => "energy",
            StrategyKind::Flexible => "flexible",
        })
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "confidence" => Ok(StrategyKind::Confidence),
            "energy" => Ok(StrategyKind::Energy),
            "flexible" => Ok(StrategyKind::Flexible),
            other => Err(Error::InvalidArgument(format!("unknown strategy `{other}`"))),
        }
    }
}

/// Everything that determines a training run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub strategy: StrategyKind,
    pub tau_c: f64,
    pub tau_e: f64,
    pub temperature: f64,
    pub lambda_u: f64,
    pub lr0: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub labeled_batch: usize,
    pub unlabeled_ratio: usize,
    pub total_iters: usize,
    pub eval_every: usize,
    pub ema_momentum: f64,
    /// `None` picks constant for imbalanced training sets, cosine otherwise.
    pub schedule: Option<Schedule>,
    pub seed: u64,
    pub augment: AugmentSpec,
    /// Hidden layer widths of the classifier.
    pub hidden: Vec<usize>,
    /// Head and tail group sizes for pseudo-label analytics.
    pub groups: (usize, usize),
    pub dataset: Option<PathBuf>,
    pub test_dataset: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            strategy: StrategyKind::Energy,
            tau_c: 0.95,
            tau_e: -8.0,
            temperature: 1.0,
            lambda_u: 1.0,
            lr0: 0.03,
            momentum: 0.9,
            weight_decay: 5e-4,
            labeled_batch: 64,
            unlabeled_ratio: 7,
            total_iters: 2000,
            eval_every: 100,
            ema_momentum: 0.999,
            schedule: None,
            seed: 0,
            augment: AugmentSpec::default(),
            hidden: vec![64],
            groups: (3, 3),
            dataset: None,
            test_dataset: None,
        }
    }
}

/// Every accepted key, in the order `to_kv_text` writes them.
pub const CONFIG_KEYS: &[&str] = &[
    "strategy",
    "tau_c",
    "tau_e",
    "temperature",
    "lambda_u",
    "lr0",
    "momentum",
    "weight_decay",
    "labeled_batch",
    "unlabeled_ratio",
    "total_iters",
    "eval_every",
    "ema_momentum",
    "schedule",
    "seed",
    "weak_sigma",
    "strong_sigma",
    "strong_dropout",
    "hidden",
    "groups",
    "dataset",
    "test_dataset",
];

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("`{key}` expects a number, got `{value}`")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<usize>> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse_num(key, v.trim())).collect()
}

impl TrainConfig {
    /// Sets one key. Unknown keys are an error.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "strategy" => self.strategy = value.parse()?,
            "tau_c" => self.tau_c = parse_num(key, value)?,
            "tau_e" => self.tau_e = parse_num(key, value)?,
            "temperature" => self.temperature = parse_num(key, value)?,
            "lambda_u" => self.lambda_u = parse_num(key, value)?,
            "lr0" => self.lr0 = parse_num(key, value)?,
            "momentum" => self.momentum = parse_num(key, value)?,
            "weight_decay" => self.weight_decay = parse_num(key, value)?,
            "labeled_batch" => self.labeled_batch = parse_num(key, value)?,
            "unlabeled_ratio" => self.unlabeled_ratio = parse_num(key, value)?,
            "total_iters" => self.total_iters = parse_num(key, value)?,
            "eval_every" => self.eval_every = parse_num(key, value)?,
            "ema_momentum" => self.ema_momentum = parse_num(key, value)?,
            "schedule" => {
                self.schedule = match value {
                    "auto" => None,
                    v => Some(v.parse()?),
                }
            }
            "seed" => self.seed = parse_num(key, value)?,
            "weak_sigma" => self.augment.weak_sigma = parse_num(key, value)?,
            "strong_sigma" => self.augment.strong_sigma = parse_num(key, value)?,
            "strong_dropout" => self.augment.strong_dropout = parse_num(key, value)?,
            "hidden" => self.hidden = parse_list(key, value)?,
            "groups" => {
                let g = parse_list(key, value)?;
                let [h, t] = g[..] else {
                    return Err(Error::InvalidArgument(format!("`groups` expects `head,tail`, got `{value}`")));
                };
                self.groups = (h, t);
            }
            "dataset" => self.dataset = Some(PathBuf::from(value)),
            "test_dataset" => self.test_dataset = Some(PathBuf::from(value)),
            other => return Err(Error::InvalidArgument(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::InvalidArgument(format!("override `{assignment}` is not key=value")))?;
        self.set(k.trim(), v)
    }

    /// Parses `key = value` lines over the defaults. `#` starts a comment;
    /// later assignments win.
    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(source_name, i + 1, format!("expected key = value, got `{line}`")))?;
            cfg.set(k.trim(), v)
                .map_err(|e| Error::parse(source_name, i + 1, e.to_string()))?;
        }
        Ok(cfg)
    }

    /// Reads a config file; relative dataset paths resolve against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = TrainConfig::parse(&text, &path.display().to_string())?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.dataset, &mut cfg.test_dataset].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// The value of `key` as written by `to_kv_text`.
    pub fn get(&self, key: &str) -> Option<String> {
        let join = |v: &[usize]| v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",");
        Some(match key {
            "strategy" => self.strategy.to_string(),
            "tau_c" => self.tau_c.to_string(),
            "tau_e" => self.tau_e.to_string(),
            "temperature" => self.temperature.to_string(),
            "lambda_u" => self.lambda_u.to_string(),
            "lr0" => self.lr0.to_string(),
            "momentum" => self.momentum.to_string(),
            "weight_decay" => self.weight_decay.to_string(),
            "labeled_batch" => self.labeled_batch.to_string(),
            "unlabeled_ratio" => self.unlabeled_ratio.to_string(),
            "total_iters" => self.total_iters.to_string(),
            "eval_every" => self.eval_every.to_string(),
            "ema_momentum" => self.ema_momentum.to_string(),
            "schedule" => self.schedule.map_or_else(|| "auto".to_string(), |s| s.to_string()),
            "seed" => self.seed.to_string(),
            "weak_sigma" => self.augment.weak_sigma.to_string(),
            "strong_sigma" => self.augment.strong_sigma.to_string(),
            "strong_dropout" => self.augment.strong_dropout.to_string(),
            "hidden" => join(&self.hidden),
            "groups" => format!("{},{}", self.groups.0, self.groups.1),
            "dataset" => self.dataset.as_ref()?.display().to_string(),
            "test_dataset" => self.test_dataset.as_ref()?.display().to_string(),
            _ => return None,
        })
    }

    pub fn to_kv_text(&self) -> String {
        let mut s = String::new();
        for key in CONFIG_KEYS {
            if let Some(v) = self.get(key) {
                let _ = writeln!(s, "{key} = {v}");
            }
        }
        s
    }

    /// The learning-rate schedule for a training set with these class counts.
    pub fn resolved_schedule(&self, class_counts: &[usize]) -> Schedule {
        self.schedule.unwrap_or_else(|| {
            let max = class_counts.iter().max();
            if max != class_counts.iter().min() {
                Schedule::Constant
            } else {
                Schedule::Cosine
            }
        })
    }

    pub fn unlabeled_batch(&self) -> usize {
        self.labeled_batch * self.unlabeled_ratio
    }

    /// The gate for a `num_classes`-way problem; flexible progress starts at
    /// zero.
    pub fn gate_strategy(&self, num_classes: usize) -> GateStrategy {
        match self.strategy {
            StrategyKind::Confidence => GateStrategy::Confidence { tau_c: self.tau_c },
            StrategyKind::Energy => GateStrategy::Energy {
                tau_e: self.tau_e,
                temperature: self.temperature,
            },
            StrategyKind::Flexible => GateStrategy::flexible(self.tau_c, num_classes),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.labeled_batch == 0 || self.unlabeled_ratio == 0 {
            return bad("labeled_batch and unlabeled_ratio must be positive".into());
        }
        if !(self.lambda_u >= 0.0 && self.lambda_u.is_finite()) {
            return bad(format!("lambda_u must be >= 0, got {}", self.lambda_u));
        }
        if self.total_iters == 0 || self.eval_every == 0 {
            return bad("total_iters and eval_every must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.ema_momentum) {
            return bad(format!("ema_momentum must lie in [0, 1], got {}", self.ema_momentum));
        }
        if self.hidden.contains(&0) {
            return bad("hidden widths must be positive".into());
        }
        self.augment.validate()?;
        self.gate_strategy(2).validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_with_comments_and_last_wins() {
        let text = "# baseline\nstrategy = confidence\ntau_c = 0.9 # lower\n\ntau_c=0.95\nhidden = 32,16\n";
        let c = TrainConfig::parse(text, "cfg").unwrap();
        assert_eq!(c.strategy, StrategyKind::Confidence);
        assert_eq!(c.tau_c, 0.95);
        assert_eq!(c.hidden, vec![32, 16]);
        assert_eq!(c.unlabeled_batch(), 448);
    }

    #[test]
    fn unknown_keys_are_errors() {
        let err = TrainConfig::parse("tau_x = 1\n", "cfg").unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
        let mut c = TrainConfig::default();
        assert!(c.apply_override("nope=1").is_err());
        assert!(c.apply_override("tau_e").is_err());
    }

    #[test]
    fn overrides_and_infinite_thresholds() {
        let mut c = TrainConfig::default();
        c.apply_override("tau_e=-inf").unwrap();
        c.apply_override("lambda_u=0").unwrap();
        assert_eq!(c.tau_e, f64::NEG_INFINITY);
        assert_eq!(c.lambda_u, 0.0);
    }

    #[test]
    fn text_echo_round_trips() {
        let mut c = TrainConfig::default();
        c.apply_override("strategy=flexible").unwrap();
        c.apply_override("dataset=data/train.txt").unwrap();
        c.apply_override("weak_sigma=0.05").unwrap();
        let back = TrainConfig::parse(&c.to_kv_text(), "echo").unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let mut c = TrainConfig::default();
        c.lambda_u = -1.0;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::default();
        c.temperature = 0.0;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::default();
        c.augment.strong_sigma = 0.0;
        assert!(c.validate().is_err());
    }
}

//! The training loop.

use std::io::Write;

use super::batches::{BatchSampler, Batches};
use super::config::TrainConfig;
use super::loss::{supervised_loss, unsupervised_loss};
use crate::analytics::{ClassGroups, PrCounts, RunRecord, RunSummary};
use crate::datagen::{strong_view, weak_view, Dataset};
use crate::error::{Error, Result};
use crate::gating::{update_flexible_progress, write_decisions, GateStrategy, PseudoLabelDecision, DECISION_DUMP_HEADER};
use crate::numerics::{argmax, sgd_step, EmaParams, MlpParams, OptState, Schedule, Tape, Tensor};
use crate::rng::{derive_seed, stream};

/// Parameters, optimizer, EMA shadow, and gate of one run.
#[derive(Clone, Debug)]
pub struct RunState {
    pub params: MlpParams,
    pub opt: OptState,
    pub ema: EmaParams,
    pub strategy: GateStrategy,
}

impl RunState {
    pub fn new(config: &TrainConfig, input_dim: usize, num_classes: usize) -> Result<Self> {
        config.validate()?;
        let mut dims = vec![input_dim];
        dims.extend(&config.hidden);
        dims.push(num_classes);
        let params = MlpParams::init(&dims, config.seed)?;
        let opt = OptState::new(
            &params,
            config.lr0,
            config.momentum,
            config.weight_decay,
            config.total_iters,
            config.schedule.unwrap_or(Schedule::Cosine),
        )?;
        let ema = EmaParams::new(&params, config.ema_momentum)?;
        Ok(RunState {
            params,
            opt,
            ema,
            strategy: config.gate_strategy(num_classes),
        })
    }
}

/// What one optimizer step produced.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    /// Zero-based index of the step just taken.
    pub iteration: usize,
    pub loss_s: f64,
    pub loss_u: f64,
    pub loss_total: f64,
    pub mask_rate: f64,
    /// One per unlabeled-batch sample, with dataset row indices and ground
    /// truth attached for auditing.
    pub decisions: Vec<PseudoLabelDecision>,
}

/// Seeds of the three views drawn at `iteration`.
fn view_seeds(seed: u64, iteration: usize) -> [u64; 3] {
    let base = 3 * iteration as u64;
    [0, 1, 2].map(|j| derive_seed(seed, stream::AUGMENT, base + j))
}

/// One iteration: `L = L_s + λ·L_u`, backward, SGD step, EMA update.
pub fn train_step(state: &mut RunState, ds: &Dataset, batches: &Batches, config: &TrainConfig) -> Result<StepOutcome> {
    let iteration = state.opt.iter();
    let [seed_l, seed_w, seed_s] = view_seeds(config.seed, iteration);

    let x_l = ds.features().select_rows(&batches.labeled)?;
    let labels = batches
        .labeled
        .iter()
        .map(|&i| ds.training_label(i))
        .collect::<Result<Vec<_>>>()?;
    let x_l = weak_view(&x_l, &config.augment, seed_l)?;

    let mut tape = Tape::new();
    let model = state.params.bind(&mut tape);
    let ls = supervised_loss(&mut tape, &model, &x_l, &labels)?;

    let (lu, mut decisions) = if batches.unlabeled.is_empty() {
        (tape.constant(Tensor::scalar(0.0)), Vec::new())
    } else {
        let x_u = ds.features().select_rows(&batches.unlabeled)?;
        let weak = weak_view(&x_u, &config.augment, seed_w)?;
        let strong = strong_view(&x_u, &config.augment, seed_s)?;
        unsupervised_loss(&state.params, &mut tape, &model, &weak, &strong, &state.strategy)?
    };
    let scaled = tape.scale(lu, config.lambda_u);
    let total = tape.add(ls, scaled)?;
    let (loss_s, loss_u, loss_total) = (tape.scalar(ls), tape.scalar(lu), tape.scalar(total));

    if !loss_total.is_finite() {
        let max_abs = state
            .params
            .tensors()
            .flat_map(|t| t.data().iter())
            .fold(0.0f64, |m, v| m.max(v.abs()));
        return Err(Error::NonFinite {
            iteration,
            dump: format!(
                "loss_s={loss_s} loss_u={loss_u} loss_total={loss_total} lr={} max|param|={max_abs} gated={}",
                state.opt.lr(),
                decisions.iter().filter(|d| d.gated).count()
            ),
        });
    }

    tape.backward(total)?;
    state.params.zero_grad();
    state.params.absorb_grads(&tape, &model)?;
    sgd_step(&mut state.params, &mut state.opt)?;
    state.ema.update(&state.params)?;

    if matches!(state.strategy, GateStrategy::Flexible { .. }) {
        update_flexible_progress(&decisions, &mut state.strategy)?;
    }
    for (d, &row) in decisions.iter_mut().zip(&batches.unlabeled) {
        d.sample_index = row;
        d.true_class = ds.ground_truth(row);
    }
    let gated = decisions.iter().filter(|d| d.gated).count();
    let mask_rate = if decisions.is_empty() {
        0.0
    } else {
        gated as f64 / decisions.len() as f64
    };
    Ok(StepOutcome {
        iteration,
        loss_s,
        loss_u,
        loss_total,
        mask_rate,
        decisions,
    })
}

/// Top-1 accuracy on a fully labeled set. Ties go to the lowest class index.
pub fn evaluate(params: &MlpParams, test: &Dataset) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::InvalidArgument("evaluation on an empty test set".into()));
    }
    let logits = params.predict(test.features())?;
    let mut hits = 0usize;
    for (i, row) in logits.row_iter().enumerate() {
        let truth = test
            .ground_truth(i)
            .ok_or_else(|| Error::Contract(format!("test sample {i} has no label")))?;
        hits += usize::from(argmax(row) == truth);
    }
    Ok(hits as f64 / test.len() as f64)
}

/// Everything a finished run leaves behind.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub records: Vec<RunRecord>,
    pub summary: RunSummary,
    pub params: MlpParams,
    pub ema: MlpParams,
}

/// Drives [`train_step`] over a dataset and collects evaluation records.
pub struct Trainer<'a> {
    config: TrainConfig,
    train: &'a Dataset,
    test: &'a Dataset,
    sampler: BatchSampler,
    state: RunState,
    groups: ClassGroups,
    window: PrCounts,
    whole_run: PrCounts,
    epoch_len: usize,
    records: Vec<RunRecord>,
}

impl<'a> Trainer<'a> {
    /// Resolves an automatic schedule from the training set's class counts.
    pub fn new(mut config: TrainConfig, train: &'a Dataset, test: &'a Dataset) -> Result<Self> {
        config.validate()?;
        config.schedule = Some(config.resolved_schedule(train.class_counts()));
        if test.dim() != train.dim() || test.num_classes() != train.num_classes() {
            return Err(Error::shape(
                "Trainer::new",
                format!(
                    "train is {}-d/{} classes, test is {}-d/{} classes",
                    train.dim(),
                    train.num_classes(),
                    test.dim(),
                    test.num_classes()
                ),
            ));
        }
        let sampler = BatchSampler::new(train)?;
        let state = RunState::new(&config, train.dim(), train.num_classes())?;
        let groups = ClassGroups::from_counts(train.class_counts(), config.groups.0, config.groups.1)?;
        let epoch_len = (sampler.unlabeled_pool() / config.unlabeled_batch()).max(1);
        Ok(Trainer {
            config,
            train,
            test,
            sampler,
            state,
            groups,
            window: PrCounts::new(),
            whole_run: PrCounts::new(),
            epoch_len,
            records: Vec::new(),
        })
    }

    pub fn state(&self) -> &RunState {
        &self.state
    }

    pub fn groups(&self) -> &ClassGroups {
        &self.groups
    }

    pub fn records(&self) -> &[RunRecord] {
        &self.records
    }

    pub fn is_done(&self) -> bool {
        self.state.opt.iter() >= self.config.total_iters
    }

    /// Takes one step; returns the outcome and, at evaluation points, the
    /// new record.
    pub fn step(&mut self) -> Result<(StepOutcome, Option<RunRecord>)> {
        let iter = self.state.opt.iter();
        if iter > 0 && iter % self.epoch_len == 0 {
            // flexible progress counts per epoch of the unlabeled pool
            self.state.strategy.reset_progress();
        }
        let batches = self.sampler.sample(
            self.config.seed,
            iter,
            self.config.labeled_batch,
            self.config.unlabeled_ratio,
        );
        let out = train_step(&mut self.state, self.train, &batches, &self.config)?;
        self.window.extend(&out.decisions, &self.groups);
        self.whole_run.extend(&out.decisions, &self.groups);

        let done = iter + 1;
        let record = if done % self.config.eval_every == 0 || done == self.config.total_iters {
            let r = RunRecord {
                iteration: done,
                loss_s: out.loss_s,
                loss_u: out.loss_u,
                loss_total: out.loss_total,
                mask_rate: out.mask_rate,
                pr: self.window.table(),
                ood_included: self.whole_run.ood_gated(),
                acc_raw: evaluate(&self.state.params, self.test)?,
                acc_ema: evaluate(self.state.ema.shadow(), self.test)?,
            };
            self.window = PrCounts::new();
            self.records.push(r);
            Some(r)
        } else {
            None
        };
        Ok((out, record))
    }

    /// Runs to completion, optionally streaming every decision to `dump`.
    pub fn run(mut self, mut dump: Option<&mut dyn Write>) -> Result<RunOutput> {
        if let Some(w) = dump.as_deref_mut() {
            writeln!(w, "{DECISION_DUMP_HEADER}").map_err(|e| Error::io("decision dump", e))?;
        }
        while !self.is_done() {
            let (out, _) = self.step()?;
            if let Some(w) = dump.as_deref_mut() {
                write_decisions(w, out.iteration, &out.decisions).map_err(|e| Error::io("decision dump", e))?;
            }
        }
        let last = *self.records.last().expect("final iteration always records");
        let config = self
            .config
            .to_kv_text()
            .lines()
            .filter_map(|l| l.split_once(" = "))
            .map(|(k, v)| (k.to_string(), serde_json::Value::String(v.to_string())))
            .collect();
        let summary = RunSummary {
            seed: self.config.seed,
            strategy: self.config.strategy.to_string(),
            iterations: self.config.total_iters,
            final_acc_ema: last.acc_ema,
            final_acc_raw: last.acc_raw,
            final_pr: last.pr,
            run_pr: self.whole_run.table(),
            ood_included: self.whole_run.ood_gated(),
            gated_total: self.whole_run.gated(),
            config,
        };
        Ok(RunOutput {
            records: self.records,
            summary,
            params: self.state.params,
            ema: self.state.ema.shadow().clone(),
        })
    }
}

/// Convenience wrapper: a full run without a decision dump.
pub fn run(config: &TrainConfig, train: &Dataset, test: &Dataset) -> Result<RunOutput> {
    Trainer::new(config.clone(), train, test)?.run(None)
}

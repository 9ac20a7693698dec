//! The `ssl-lab` command line: `gen-data`, `train`, `sweep`, `analyze`.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::analytics::{self, ClassGroups, PrCounts, PrTable};
use crate::datagen::{BenchmarkSpec, Dataset, OodPlacement};
use crate::error::{Error, Result};
use crate::gating::read_decisions;
use crate::trainer::{TrainConfig, Trainer};

#[derive(Debug, Parser)]
#[command(name = "ssl-lab", version, about = "Semi-supervised pseudo-label gating experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize a long-tailed mixture with a labeled split and optional OOD samples.
    GenData(GenDataArgs),
    /// Run one training from a config file.
    Train(TrainArgs),
    /// Train over a grid of values of one parameter and several seeds.
    Sweep(SweepArgs),
    /// Recompute pseudo-label precision/recall from a decision dump.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long = "classes")]
    pub classes: usize,
    #[arg(long)]
    pub dim: usize,
    /// Imbalance ratio between the largest and smallest class.
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    /// Samples in the largest class.
    #[arg(long)]
    pub n1: usize,
    #[arg(long = "labeled-frac")]
    pub labeled_frac: f64,
    /// Out-of-distribution samples added to the unlabeled pool.
    #[arg(long, default_value_t = 0)]
    pub ood: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Balanced held-out set; defaults to `<out>.test`.
    #[arg(long = "test-out")]
    pub test_out: Option<PathBuf>,
    #[arg(long = "test-per-class", default_value_t = BenchmarkSpec::default().test_per_class)]
    pub test_per_class: usize,
    /// Distance of class means from the origin.
    #[arg(long, default_value_t = BenchmarkSpec::default().radius)]
    pub radius: f64,
    /// Per-class standard deviation.
    #[arg(long, default_value_t = BenchmarkSpec::default().scale)]
    pub scale: f64,
    /// `centroid`, or `beyond:<factor>` for a cluster that many class scales
    /// past the farthest mean.
    #[arg(long = "ood-placement", default_value = "beyond:10")]
    pub ood_placement: OodPlacement,
    #[arg(long = "ood-scale", default_value_t = BenchmarkSpec::default().ood_scale)]
    pub ood_scale: f64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// `key=value` assignments applied after the file; the last one wins.
    #[arg(long = "override", num_args = 1..)]
    pub overrides: Vec<String>,
    #[arg(long = "out-dir", default_value = "run")]
    pub out_dir: PathBuf,
    /// Also write every pseudo-label decision to `<out-dir>/decisions.csv`.
    #[arg(long)]
    pub decisions: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long = "override", num_args = 1..)]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub param: String,
    /// Comma-separated values, e.g. "-7.5,-8.5,-9.5".
    #[arg(long, allow_hyphen_values = true)]
    pub values: String,
    /// Number of seeds, counted up from the config seed.
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long = "out-dir", default_value = "sweep")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub decisions: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Head and tail class counts, e.g. "3,3".
    #[arg(long, default_value = "3,3")]
    pub groups: String,
    /// Where to write the table and OOD series; printed only when absent.
    #[arg(long = "out-dir")]
    pub out_dir: Option<PathBuf>,
}

/// Parses `args` and runs the command, printing to stdout/stderr.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let stdout = std::io::stdout();
    match execute(&cli.command, &mut stdout.lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

pub fn execute(command: &Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::GenData(a) => gen_data(a, out),
        Command::Train(a) => train(a, out),
        Command::Sweep(a) => sweep(a, out),
        Command::Analyze(a) => analyze(a, out),
    }
}

fn say(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(|e| Error::io("stdout", e))
}

/// Appends `.test` to the dataset path.
pub fn default_test_path(dataset: &Path) -> PathBuf {
    let mut s = dataset.as_os_str().to_owned();
    s.push(".test");
    PathBuf::from(s)
}

pub fn gen_data(a: &GenDataArgs, out: &mut dyn Write) -> Result<()> {
    let spec = BenchmarkSpec {
        num_classes: a.classes,
        dim: a.dim,
        radius: a.radius,
        scale: a.scale,
        gamma: a.gamma,
        n1: a.n1,
        labeled_fraction: a.labeled_frac,
        n_ood: a.ood,
        ood_placement: a.ood_placement,
        ood_scale: a.ood_scale,
        test_per_class: a.test_per_class,
        seed: a.seed,
    };
    let bench = spec.build()?;
    let test_path = a.test_out.clone().unwrap_or_else(|| default_test_path(&a.out));
    bench.train.save(&a.out)?;
    bench.test.save(&test_path)?;

    let mut text = String::from("class,labeled,unlabeled\n");
    for (k, (l, u)) in bench.train.split_counts().iter().enumerate() {
        text += &format!("{k},{l},{u}\n");
    }
    let (l, u, o) = bench.train.partition_sizes();
    text += &format!(
        "total labeled={l} unlabeled={u} ood={o}\nwrote {} and {}\n",
        a.out.display(),
        test_path.display()
    );
    say(out, &text)
}

fn load_config(path: &Path, overrides: &[String]) -> Result<TrainConfig> {
    let mut cfg = TrainConfig::load(path)?;
    for o in overrides {
        cfg.apply_override(o)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Loads the training set and its held-out set.
pub fn load_datasets(cfg: &TrainConfig) -> Result<(Dataset, Dataset)> {
    let path = cfg
        .dataset
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("config sets no `dataset`".into()))?;
    let test_path = cfg.test_dataset.clone().unwrap_or_else(|| default_test_path(path));
    Ok((Dataset::load(path)?, Dataset::load(test_path)?))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes `metrics.csv`, `summary.json`, `params.txt`, `ema_params.txt`, the
/// resolved `config.txt`, and optionally `decisions.csv` to the output
/// directory.
pub fn train(a: &TrainArgs, out: &mut dyn Write) -> Result<()> {
    let mut cfg = load_config(&a.config, &a.overrides)?;
    let (train, test) = load_datasets(&cfg)?;
    cfg.schedule = Some(cfg.resolved_schedule(train.class_counts()));
    create_dir(&a.out_dir)?;
    let trainer = Trainer::new(cfg.clone(), &train, &test)?;
    let result = if a.decisions {
        let path = a.out_dir.join("decisions.csv");
        let f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(f);
        let r = trainer.run(Some(&mut w))?;
        w.flush().map_err(|e| Error::io(&path, e))?;
        r
    } else {
        trainer.run(None)?
    };
    analytics::export(
        &result.records,
        &result.summary,
        &a.out_dir.join("metrics.csv"),
        &a.out_dir.join("summary.json"),
    )?;
    result.params.save(a.out_dir.join("params.txt"))?;
    result.ema.save(a.out_dir.join("ema_params.txt"))?;
    let cfg_path = a.out_dir.join("config.txt");
    fs::write(&cfg_path, cfg.to_kv_text()).map_err(|e| Error::io(&cfg_path, e))?;

    let s = &result.summary;
    say(
        out,
        &format!(
            "{} seed={} iterations={}\nfinal acc_ema={:.4} acc_raw={:.4} gated={} ood_included={}\n{}",
            s.strategy, s.seed, s.iterations, s.final_acc_ema, s.final_acc_raw, s.gated_total, s.ood_included, s.run_pr
        ),
    )
}

pub fn parse_values(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("bad sweep value `{s}`")))
        })
        .collect()
}

/// Writes `sweep.csv` (one row per run) and `sweep_summary.csv` (per value).
pub fn sweep(a: &SweepArgs, out: &mut dyn Write) -> Result<()> {
    if !analytics::SWEEPABLE.contains(&a.param.as_str()) {
        return Err(Error::InvalidArgument(format!(
            "`{}` is not sweepable; choose one of {}",
            a.param,
            analytics::SWEEPABLE.join(", ")
        )));
    }
    let cfg = load_config(&a.config, &a.overrides)?;
    let values = parse_values(&a.values)?;
    if a.seeds == 0 {
        return Err(Error::InvalidArgument("--seeds must be at least 1".into()));
    }
    let seeds: Vec<u64> = (0..a.seeds).map(|i| cfg.seed + i).collect();
    let jobs = a
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let (train, test) = load_datasets(&cfg)?;
    let table = analytics::threshold_sweep(&cfg, &a.param, &values, &seeds, &train, &test, jobs)?;

    create_dir(&a.out_dir)?;
    let rows = table.rows_csv();
    let stats = table.stats_csv();
    for (name, text) in [("sweep.csv", &rows), ("sweep_summary.csv", &stats)] {
        let p = a.out_dir.join(name);
        fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
    }
    say(out, &format!("{rows}\n{stats}"))
}

pub fn parse_groups(text: &str) -> Result<(usize, usize)> {
    let bad = || Error::InvalidArgument(format!("groups must be `head,tail`, got `{text}`"));
    let (h, t) = text.split_once(',').ok_or_else(bad)?;
    Ok((h.trim().parse().map_err(|_| bad())?, t.trim().parse().map_err(|_| bad())?))
}

/// Result of [`analyze_decisions`].
#[derive(Clone, Debug, PartialEq)]
pub struct Analysis {
    pub table: PrTable,
    /// `(iteration, OOD samples gated up to and including it)`.
    pub ood_series: Vec<(usize, u64)>,
    pub decisions: u64,
}

/// Checks every decision against the dataset and tallies it.
pub fn analyze_decisions(
    decisions: &[crate::gating::DumpedDecision],
    ds: &Dataset,
    groups: &ClassGroups,
) -> Result<Analysis> {
    let mut counts = PrCounts::new();
    let mut ood_series: Vec<(usize, u64)> = Vec::new();
    for (line, dd) in decisions.iter().enumerate() {
        let d = &dd.decision;
        if d.sample_index >= ds.len() {
            return Err(Error::Integrity(format!(
                "decision {} refers to sample {} but the dataset has {}",
                line + 1,
                d.sample_index,
                ds.len()
            )));
        }
        if ds.ground_truth(d.sample_index) != d.true_class {
            return Err(Error::Integrity(format!(
                "decision {} gives sample {} true class {:?}, dataset says {:?}",
                line + 1,
                d.sample_index,
                d.true_class,
                ds.ground_truth(d.sample_index)
            )));
        }
        if d.predicted_class >= ds.num_classes() {
            return Err(Error::Integrity(format!(
                "decision {} predicts class {} of {}",
                line + 1,
                d.predicted_class,
                ds.num_classes()
            )));
        }
        counts.add(d, groups);
        match ood_series.last_mut() {
            Some((it, n)) if *it == dd.iteration => *n = counts.ood_gated(),
            _ => ood_series.push((dd.iteration, counts.ood_gated())),
        }
    }
    Ok(Analysis {
        table: counts.table(),
        ood_series,
        decisions: counts.decisions(),
    })
}

/// Prints the table and, with `--out-dir`, writes `pr_table.csv` and
/// `ood_series.csv`.
pub fn analyze(a: &AnalyzeArgs, out: &mut dyn Write) -> Result<()> {
    let (n_head, n_tail) = parse_groups(&a.groups)?;
    let ds = Dataset::load(&a.dataset)?;
    let groups = ClassGroups::from_counts(ds.class_counts(), n_head, n_tail)?;
    let f = fs::File::open(&a.decisions).map_err(|e| Error::io(&a.decisions, e))?;
    let decisions = read_decisions(BufReader::new(f), &a.decisions.display().to_string())?;
    let analysis = analyze_decisions(&decisions, &ds, &groups)?;

    let overall_only = n_head == 0 && n_tail == 0;
    let t = &analysis.table;
    let mut csv = String::from("group,precision,recall\n");
    let mut cells = vec![("overall", t.overall)];
    if !overall_only {
        cells.extend([("head", t.head), ("body", t.body), ("tail", t.tail)]);
    }
    for (name, c) in &cells {
        csv += &format!(
            "{name},{},{}\n",
            analytics::fmt_metric(c.precision),
            analytics::fmt_metric(c.recall)
        );
    }
    let mut series = String::from("iteration,ood_included\n");
    for (it, n) in &analysis.ood_series {
        series += &format!("{it},{n}\n");
    }
    if let Some(dir) = &a.out_dir {
        create_dir(dir)?;
        for (name, text) in [("pr_table.csv", &csv), ("ood_series.csv", &series)] {
            let p = dir.join(name);
            fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        }
    }
    let total_ood = analysis.ood_series.last().map_or(0, |s| s.1);
    say(
        out,
        &format!("decisions={} ood_included={total_ood}\n{csv}", analysis.decisions),
    )
}

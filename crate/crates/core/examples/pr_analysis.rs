//! Streams every gate decision of a run into head/body/tail precision and
//! recall, then tracks cumulative OOD inclusion over time.
//!
//! ```text
//! cargo run --release --example pr_analysis
//! ```

use ssl_lab::analytics::{ood_inclusion, PrCounts};
use ssl_lab::datagen::BenchmarkSpec;
use ssl_lab::trainer::{TrainConfig, Trainer};

fn main() -> ssl_lab::Result<()> {
    let bench = BenchmarkSpec {
        n1: 1000,
        n_ood: 300,
        ..BenchmarkSpec::default()
    }
    .build()?;
    let cfg = TrainConfig {
        total_iters: 400,
        eval_every: 100,
        tau_e: -6.0,
        ..TrainConfig::default()
    };
    let mut trainer = Trainer::new(cfg, &bench.train, &bench.test)?;
    let groups = trainer.groups().clone();
    let mut counts = PrCounts::new();
    let mut ood = 0;
    while !trainer.is_done() {
        let (step, record) = trainer.step()?;
        counts.extend(&step.decisions, &groups);
        ood += ood_inclusion(&step.decisions);
        if let Some(r) = record {
            println!("iteration {:>4}: mask rate {:.3}, cumulative ood {ood}", r.iteration, r.mask_rate);
        }
    }
    let t = counts.table();
    println!("{} decisions, {} gated", counts.decisions(), counts.gated());
    println!("group,precision,recall");
    for (name, c) in [("overall", t.overall), ("head", t.head), ("body", t.body), ("tail", t.tail)] {
        let f = |v: Option<f64>| v.map_or_else(|| "undef".into(), |v| format!("{v:.4}"));
        println!("{name},{},{}", f(c.precision), f(c.recall));
    }
    Ok(())
}

//! Trains the same long-tailed benchmark under confidence, flexible and
//! energy gating and compares pseudo-label quality and accuracy.
//!
//! ```text
//! cargo run --release --example gating_comparison [iterations]
//! ```

use ssl_lab::datagen::BenchmarkSpec;
use ssl_lab::trainer::{run, TrainConfig};

fn main() -> ssl_lab::Result<()> {
    let iters: usize = std::env::args().nth(1).map_or(1000, |s| s.parse().expect("iterations"));
    let bench = BenchmarkSpec::default().build()?;
    println!("strategy,tail_recall,precision,mask_rate,acc_ema");
    for (strategy, key, tau) in [
        ("confidence", "tau_c", 0.95),
        ("confidence", "tau_c", 0.6),
        ("flexible", "tau_c", 0.95),
        ("energy", "tau_e", -6.0),
    ] {
        let mut cfg = TrainConfig {
            total_iters: iters,
            eval_every: iters / 10,
            ..TrainConfig::default()
        };
        cfg.set("strategy", strategy)?;
        cfg.set(key, &tau.to_string())?;
        let out = run(&cfg, &bench.train, &bench.test)?;
        let last = out.records.last().expect("at least one record");
        println!(
            "{strategy} {key}={tau},{:.4},{:.4},{:.3},{:.4}",
            last.pr.tail.recall.unwrap_or(0.0),
            last.pr.overall.precision.unwrap_or(0.0),
            last.mask_rate,
            out.summary.final_acc_ema
        );
    }
    Ok(())
}

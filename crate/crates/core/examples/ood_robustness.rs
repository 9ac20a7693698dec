//! Injects an out-of-distribution cluster at the class centroid and counts
//! how many OOD samples each gate lets into the unsupervised loss.
//!
//! ```text
//! cargo run --release --example ood_robustness
//! ```

use ssl_lab::datagen::{BenchmarkSpec, OodPlacement};
use ssl_lab::trainer::{run, TrainConfig};

fn main() -> ssl_lab::Result<()> {
    let bench = BenchmarkSpec {
        radius: 11.0,
        ood_placement: OodPlacement::Centroid,
        n_ood: 1900,
        ..BenchmarkSpec::default()
    }
    .build()?;
    let (_, u, o) = bench.train.partition_sizes();
    println!("pool {} with {o} ood samples", u + o);
    println!("strategy,ood_included,gated_total,acc_ema");
    for (strategy, key, tau) in [("confidence", "tau_c", 0.95), ("flexible", "tau_c", 0.95), ("energy", "tau_e", -8.0)] {
        let mut cfg = TrainConfig {
            total_iters: 1000,
            eval_every: 250,
            ..TrainConfig::default()
        };
        cfg.set("strategy", strategy)?;
        cfg.set(key, &tau.to_string())?;
        let out = run(&cfg, &bench.train, &bench.test)?;
        println!(
            "{strategy},{},{},{:.4}",
            out.summary.ood_included, out.summary.gated_total, out.summary.final_acc_ema
        );
    }
    Ok(())
}

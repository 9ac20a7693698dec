//! Sweeps the energy threshold over a grid of values and seeds, printing
//! per-run accuracy and the mean/std table.
//!
//! ```text
//! cargo run --release --example threshold_sweep
//! ```

use ssl_lab::analytics::threshold_sweep;
use ssl_lab::datagen::BenchmarkSpec;
use ssl_lab::trainer::TrainConfig;

fn main() -> ssl_lab::Result<()> {
    let bench = BenchmarkSpec {
        n1: 1000,
        ..BenchmarkSpec::default()
    }
    .build()?;
    let base = TrainConfig {
        total_iters: 500,
        eval_every: 100,
        ..TrainConfig::default()
    };
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let table = threshold_sweep(&base, "tau_e", &[-9.5, -8.0, -6.0, -4.0], &[0, 1], &bench.train, &bench.test, jobs)?;
    print!("{}", table.rows_csv());
    println!();
    print!("{}", table.stats_csv());
    Ok(())
}

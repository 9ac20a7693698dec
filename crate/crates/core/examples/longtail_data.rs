//! Builds a long-tailed Gaussian-mixture benchmark and prints its class
//! profile, labeled split and OOD share.
//!
//! ```text
//! cargo run --release --example longtail_data [gamma] [n1]
//! ```

use ssl_lab::datagen::{longtail_counts, BenchmarkSpec, Origin};

fn main() -> ssl_lab::Result<()> {
    let mut args = std::env::args().skip(1);
    let gamma: f64 = args.next().map_or(100.0, |s| s.parse().expect("gamma"));
    let n1: usize = args.next().map_or(2000, |s| s.parse().expect("n1"));
    let spec = BenchmarkSpec {
        gamma,
        n1,
        n_ood: n1 / 4,
        ..BenchmarkSpec::default()
    };
    println!("closed-form counts {:?}", longtail_counts(&spec.imbalance())?);

    let bench = spec.build()?;
    println!("class,labeled,unlabeled");
    for (k, (l, u)) in bench.train.split_counts().iter().enumerate() {
        println!("{k},{l},{u}");
    }
    let (l, u, o) = bench.train.partition_sizes();
    println!("labeled {l}, unlabeled {u}, ood {o} ({:.1}% of the pool)", 100.0 * o as f64 / (u + o) as f64);
    if let Some(ood) = &bench.ood {
        println!("ood cluster sits {:.1} scales from the nearest class", ood.separation(&bench.mixture));
    }
    let first_ood = (0..bench.train.len()).find(|&i| bench.train.origin(i) == Origin::Ood);
    println!("first ood row {first_ood:?}, test set {} rows", bench.test.len());
    Ok(())
}

//! Runs ICH and the one-time baselines on the default synthetic benchmark.
//!
//! cargo run --release -p ich-core --example synthetic_benchmark -- [seed]

use ich_core::harvest::{compare_runs, Baseline, HarvestConfig};
use ich_core::synthgen::{balanced_counts, generate_dataset, DEFAULT_SIZE};
use ich_core::Metric;

fn main() -> ich_core::Result<()> {
    let seed: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(0);
    let synth = generate_dataset(&balanced_counts(40), DEFAULT_SIZE, seed)?;
    let config = HarvestConfig {
        n_pca: 10,
        n_c: 15,
        n_min: 5,
        silhouette_metric: Metric::Cosine,
        seed,
        ..HarvestConfig::default()
    };
    let started = std::time::Instant::now();
    let report = compare_runs(
        &synth.dataset,
        &config,
        &[Baseline::otc(), Baseline::features_ac()],
    )?;
    println!(
        "seed {seed}: {} clusters, {} of {} samples harvested ({:.1?})",
        report.n_clusters,
        report.n_partial,
        report.n_samples,
        started.elapsed()
    );
    print!("{}", report.to_csv());
    Ok(())
}

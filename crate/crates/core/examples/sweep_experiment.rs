// A small data-size sweep with MSE relative to Cascade-DR.
//
// The full protocol is `slate-ope synth-experiment --sweep n`; this runs
// 20 seeds with a reduced ground-truth sample so it finishes quickly.

use slate_ope::harness::{
    aggregate_mse, run_experiment, ExperimentConfig, GroupKey, MseRow, SweepMode, TruthConfig,
};
use slate_ope::Result;

pub fn run_example() -> Result<Vec<MseRow>> {
    let config = ExperimentConfig {
        n_values: vec![250, 1000],
        seed_count: 20,
        truth: TruthConfig {
            contexts: 1000,
            ..Default::default()
        },
        ..Default::default()
    };
    let rows = run_experiment(&config, SweepMode::N)?;
    let table = aggregate_mse(&rows, &[GroupKey::N], true)?;
    println!("{:>6} {:<11}{:>12}{:>10}", "n", "estimator", "MSE", "relative");
    for r in &table {
        println!(
            "{:>6} {:<11}{:>12.3e}{:>10.2}",
            r.group[0].1.to_string(),
            r.estimator,
            r.mse,
            r.relative_mse.unwrap_or(f64::NAN)
        );
    }
    Ok(table)
}

fn main() -> Result<()> {
    run_example().map(|_| ())
}

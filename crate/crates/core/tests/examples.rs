#![allow(dead_code)]

mod synthetic_data {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/synthetic_data.rs"));
}
mod compare_estimators {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/compare_estimators.rs"));
}
mod fit_baseline {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/fit_baseline.rs"));
}
mod exact_oracles {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/exact_oracles.rs"));
}
mod sweep_experiment {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/sweep_experiment.rs"));
}
mod bootstrap_logged_data {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/bootstrap_logged_data.rs"));
}

#[test]
fn synthetic_data_round_trips() {
    let data = synthetic_data::run_example().unwrap();
    assert_eq!(data.len(), 500);
    assert!(data.has_propensities());
}

#[test]
fn compare_estimators_runs() {
    let c = compare_estimators::run_example().unwrap();
    assert_eq!(c.estimates.len(), 4);
    assert!(c.estimates.iter().all(|(_, v)| v.is_finite()));
    assert!(c.truth > 0.0 && c.truth < 4.0);
}

#[test]
fn fit_baseline_runs() {
    let out = fit_baseline::run_example().unwrap();
    assert_eq!(out.len(), 3);
}

#[test]
fn exact_oracles_reports_the_suite() {
    let outcomes = exact_oracles::run_example().unwrap();
    assert_eq!(outcomes.len(), 5);
    assert!(outcomes[..4].iter().all(|c| c.passed));
}

#[test]
fn sweep_experiment_has_unit_reference() {
    let table = sweep_experiment::run_example().unwrap();
    assert_eq!(table.len(), 8);
    for r in table.iter().filter(|r| r.estimator == "Cascade-DR") {
        assert_eq!(r.relative_mse, Some(1.0));
    }
}

#[test]
fn bootstrap_emits_twenty_replicates_per_estimator() {
    let rows = bootstrap_logged_data::run_example().unwrap();
    assert_eq!(rows.len(), 20 * 4);
}

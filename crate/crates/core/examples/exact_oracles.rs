// Exact moments of the estimators on a tiny instance.
//
// With two actions and three slots every slate can be enumerated, so the
// expectation and variance of each estimator are computed exactly and
// compared with the slot recursion and with simulation.

use slate_ope::estimators::EstimatorKind;
use slate_ope::rng;
use slate_ope::synth::{InteractionKind, RewardStructure};
use slate_ope::verify::{
    exact_estimator_expectation, exact_estimator_variance, monte_carlo_moments,
    recursive_variance, run_oracle_suite, true_q_values, CheckOutcome, QTable, TinyInstance,
    TinySpec,
};
use slate_ope::Result;

pub fn run_example() -> Result<Vec<CheckOutcome>> {
    let spec = TinySpec::new(2, 3, RewardStructure::Cascade, InteractionKind::Additive, 3);
    let instance = TinyInstance::generate(&spec)?;
    let truth = true_q_values(&instance)?;
    println!("V(pi_e) = {:.6}", truth.value());

    for kind in EstimatorKind::ALL {
        let mean = exact_estimator_expectation(&instance, kind, None)?;
        let var = exact_estimator_variance(&instance, kind, None)?;
        println!("{:<11} E = {mean:.6}  Var = {var:.6}", kind.name());
    }

    let table = QTable::random(&instance, 0.0, 1.0, &mut rng::seeded(5));
    let exact = exact_estimator_variance(&instance, EstimatorKind::CascadeDr, Some(&table))?;
    let recursive = recursive_variance(&instance, Some(&table))?;
    let mc = monte_carlo_moments(&instance, EstimatorKind::CascadeDr, Some(&table), 1, 20_000, 6)?;
    println!(
        "Cascade-DR with a random table: enumerated {exact:.6}, recursive {recursive:.6}, simulated {:.6} ± {:.6}",
        mc.variance, mc.variance_std_error
    );

    let outcomes = run_oracle_suite()?;
    for c in &outcomes {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    Ok(outcomes)
}

fn main() -> Result<()> {
    run_example().map(|_| ())
}

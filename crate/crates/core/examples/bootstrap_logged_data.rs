// Bootstrap evaluation with two logged datasets.
//
// Dataset A is logged by policy A and dataset B by policy B. The on-policy
// mean of B stands in for V(pi_B); each estimator values pi_B from
// bootstrap resamples of A and the squared errors are summarized.

use slate_ope::estimators::{on_policy_estimate, BehaviorSource};
use slate_ope::harness::{bootstrap_evaluate, io, BootstrapConfig, BootstrapRow};
use slate_ope::policy::{make_behavior_policy, make_evaluation_policy, Policy};
use slate_ope::rng;
use slate_ope::synth::{EnvConfig, InteractionKind, RewardStructure, SyntheticEnv};
use slate_ope::Result;

pub fn run_example() -> Result<Vec<BootstrapRow>> {
    let config = EnvConfig::standard_setup(3, RewardStructure::Standard, InteractionKind::Additive)?;
    let env = SyntheticEnv::sample(config, &mut rng::seeded(31))?;
    let policy_a = make_behavior_policy(5, 5, 3, &mut rng::seeded(32))?;
    let policy_b: Policy = make_evaluation_policy(&policy_a, 0.6)?.into();
    let policy_a: Policy = policy_a.into();

    // round trip through files as external logs would arrive
    let dir = tempfile::tempdir()?;
    let (path_a, path_b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    io::save_dataset(&env.generate_dataset(&policy_a, 1000, &mut rng::seeded(33))?, &path_a)?;
    io::save_dataset(&env.generate_dataset(&policy_b, 1000, &mut rng::seeded(34))?, &path_b)?;
    let data_a = io::load_dataset(&path_a)?;
    let truth = on_policy_estimate(&io::load_dataset(&path_b)?)?.value;

    let rows = bootstrap_evaluate(
        &data_a,
        &policy_b,
        BehaviorSource::Logged,
        truth,
        &BootstrapConfig::default(),
    )?;
    println!("on-policy value of B: {truth:.4}");
    for name in ["IPS", "IIPS", "RIPS", "Cascade-DR"] {
        let mut se: Vec<f64> = rows
            .iter()
            .filter(|r| r.estimator == name)
            .map(|r| r.squared_error)
            .collect();
        se.sort_by(f64::total_cmp);
        println!(
            "{name:<11} median SE {:.3e}  max SE {:.3e}",
            se[se.len() / 2],
            se[se.len() - 1]
        );
    }
    Ok(rows)
}

fn main() -> Result<()> {
    run_example().map(|_| ())
}

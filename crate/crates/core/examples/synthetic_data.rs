// Simulate logged slate data and write it to disk.
//
// Builds a cascade environment, logs 500 slates from a softmax behavior
// policy, saves the dataset and both policies, and reads the dataset back.

use slate_ope::harness::io;
use slate_ope::policy::{make_behavior_policy, make_evaluation_policy, Policy};
use slate_ope::rng;
use slate_ope::synth::{EnvConfig, InteractionKind, RewardStructure, SyntheticEnv, TruthMode};
use slate_ope::types::LoggedDataset;
use slate_ope::Result;

pub fn run_example() -> Result<LoggedDataset> {
    let config = EnvConfig::standard_setup(3, RewardStructure::Cascade, InteractionKind::Decay)?;
    let env = SyntheticEnv::sample(config, &mut rng::seeded(7))?;
    let behavior = make_behavior_policy(5, 5, 3, &mut rng::seeded(8))?;
    let evaluation: Policy = make_evaluation_policy(&behavior, 0.4)?.into();
    let behavior: Policy = behavior.into();

    let data = env.generate_dataset(&behavior, 500, &mut rng::seeded(9))?;
    let first = &data.records()[0];
    println!(
        "first record: slate {:?}, clicks {:?}, propensities {:?}",
        first.slate.items(),
        first.rewards.values(),
        first.propensities.as_deref().unwrap_or_default()
    );

    let contexts = env.sample_contexts(2000, &mut rng::seeded(10))?;
    let truth = env.true_policy_value(&evaluation, &contexts, TruthMode::Exact)?;
    println!("V(pi_e) over 2000 contexts: {truth:.5}");

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("logged.jsonl");
    io::save_dataset(&data, &path)?;
    io::save_policy(&behavior, &dir.path().join("behavior.json"))?;
    io::save_policy(&evaluation, &dir.path().join("evaluation.json"))?;
    let loaded = io::load_dataset(&path)?;
    assert_eq!(loaded, data);
    println!("wrote and reloaded {} records from {}", loaded.len(), path.display());
    Ok(loaded)
}

fn main() -> Result<()> {
    run_example().map(|_| ())
}

// IPS, IIPS, RIPS and Cascade-DR on one dataset against the exact value.

use slate_ope::estimators::{estimate, BehaviorSource, EstimatorKind};
use slate_ope::policy::{make_behavior_policy, make_evaluation_policy, Policy};
use slate_ope::regression::{fit_q_model, CrossFit, LearnerConfig};
use slate_ope::rng;
use slate_ope::synth::{EnvConfig, InteractionKind, RewardStructure, SyntheticEnv, TruthMode};
use slate_ope::Result;

pub struct Comparison {
    pub truth: f64,
    pub estimates: Vec<(EstimatorKind, f64)>,
}

pub fn run_example() -> Result<Comparison> {
    let slate_size = 4;
    let config = EnvConfig::standard_setup(slate_size, RewardStructure::Cascade, InteractionKind::Additive)?;
    let env = SyntheticEnv::sample(config, &mut rng::seeded(1))?;
    let behavior = make_behavior_policy(5, 5, slate_size, &mut rng::seeded(2))?;
    let evaluation: Policy = make_evaluation_policy(&behavior, -0.4)?.into();
    let behavior: Policy = behavior.into();

    let data = env.generate_dataset(&behavior, 2000, &mut rng::seeded(3))?;
    let contexts = env.sample_contexts(5000, &mut rng::seeded(4))?;
    let truth = env.true_policy_value(&evaluation, &contexts, TruthMode::Exact)?;

    let source = BehaviorSource::Logged;
    let q = fit_q_model(&data, &evaluation, source, LearnerConfig::default(), CrossFit::None)?;
    println!("{:<12}{:>10}{:>12}{:>12}", "estimator", "estimate", "error", "max w");
    let mut estimates = Vec::new();
    for kind in EstimatorKind::ALL {
        let baseline = (kind == EstimatorKind::CascadeDr).then_some(&q as _);
        let r = estimate(kind, &data, &evaluation, source, baseline)?;
        println!(
            "{:<12}{:>10.4}{:>12.4}{:>12.1}",
            kind.name(),
            r.value,
            r.value - truth,
            r.weight_max
        );
        estimates.push((kind, r.value));
    }
    println!("{:<12}{:>10.4}", "truth", truth);
    Ok(Comparison { truth, estimates })
}

fn main() -> Result<()> {
    run_example().map(|_| ())
}

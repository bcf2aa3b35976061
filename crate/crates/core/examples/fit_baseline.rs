// Fitting the slot baselines Q̂_l used by Cascade-DR.
//
// Compares a regression tree, ridge regression and 5-fold cross-fitting,
// and shows what the fitted Q̂_1 predicts for each top item.

use slate_ope::estimators::{cascade_dr_estimate, BehaviorSource};
use slate_ope::policy::{make_behavior_policy, make_evaluation_policy, Policy};
use slate_ope::regression::{fit_q_model, predict_q, CrossFit, LearnerConfig};
use slate_ope::rng;
use slate_ope::synth::{EnvConfig, InteractionKind, RewardStructure, SyntheticEnv, TruthMode};
use slate_ope::Result;

pub fn run_example() -> Result<Vec<(String, f64)>> {
    let config = EnvConfig::standard_setup(3, RewardStructure::Cascade, InteractionKind::Decay)?;
    let env = SyntheticEnv::sample(config, &mut rng::seeded(21))?;
    let behavior = make_behavior_policy(5, 5, 3, &mut rng::seeded(22))?;
    let evaluation: Policy = make_evaluation_policy(&behavior, -0.2)?.into();
    let behavior: Policy = behavior.into();
    let data = env.generate_dataset(&behavior, 1500, &mut rng::seeded(23))?;
    let contexts = env.sample_contexts(5000, &mut rng::seeded(24))?;
    let truth = env.true_policy_value(&evaluation, &contexts, TruthMode::Exact)?;
    let source = BehaviorSource::Policy(&behavior);

    let variants = [
        ("tree", LearnerConfig::default(), CrossFit::None),
        ("ridge", LearnerConfig::Ridge { penalty: 1.0 }, CrossFit::None),
        ("tree, 5 folds", LearnerConfig::default(), CrossFit::KFold(5)),
    ];
    let mut out = Vec::new();
    for (name, learner, cross_fit) in variants {
        let q = fit_q_model(&data, &evaluation, source, learner, cross_fit)?;
        let v = cascade_dr_estimate(&data, &evaluation, source, &q)?.value;
        let x = &data.records()[0].context;
        let top: Vec<String> = (0..5)
            .map(|a| predict_q(&q, x, &[a]).map(|p| format!("{p:.2}")))
            .collect::<Result<_>>()?;
        println!("{name:<14} Cascade-DR {v:.4} (truth {truth:.4}); Q̂_1 by top item: {}", top.join(" "));
        out.push((name.to_owned(), v));
    }
    Ok(out)
}

fn main() -> Result<()> {
    run_example().map(|_| ())
}

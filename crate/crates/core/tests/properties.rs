use proptest::prelude::*;
use rand::Rng;

use slate_ope::estimators::{
    cascade_dr_estimate, estimate, importance_weights, on_policy_estimate, Baseline,
    BehaviorSource, ConstantBaseline, EstimatorKind, ZeroBaseline,
};
use slate_ope::policy::{
    make_behavior_policy, make_evaluation_policy, FactorizableSoftmaxPolicy, LinearScorer,
    PlackettLucePolicy, Policy,
};
use slate_ope::regression::{fit_q_model, CrossFit, LearnerConfig};
use slate_ope::rng;
use slate_ope::synth::{EnvConfig, InteractionKind, RewardStructure, SyntheticEnv};
use slate_ope::types::{
    make_alpha_weights, slate_reward, AlphaKind, AlphaWeights, Context, LoggedDataset,
    LoggedRecord, RewardVector, SlateAction,
};
use slate_ope::verify::{exact_estimator_variance, recursive_variance, QTable, TinyInstance, TinySpec};

fn structure() -> impl Strategy<Value = RewardStructure> {
    prop::sample::select(RewardStructure::ALL.to_vec())
}

fn interaction() -> impl Strategy<Value = InteractionKind> {
    prop::sample::select(InteractionKind::ALL.to_vec())
}

fn env(
    n_actions: usize,
    slate_size: usize,
    s: RewardStructure,
    g: InteractionKind,
    seed: u64,
) -> SyntheticEnv {
    let config = EnvConfig {
        dim: 3,
        n_actions,
        slate_size,
        alpha: make_alpha_weights(&AlphaKind::Dcg, slate_size).unwrap(),
        reward_structure: s,
        interaction_kind: g,
        interaction_scale: 1.0,
    };
    SyntheticEnv::sample(config, &mut rng::seeded(seed)).unwrap()
}

fn context(v: &[f64]) -> Context {
    Context::new(v.to_vec()).unwrap()
}

fn all_slates(n: usize, l: usize) -> Vec<Vec<usize>> {
    (0..n.pow(l as u32))
        .map(|mut code| {
            (0..l)
                .map(|_| {
                    let a = code % n;
                    code /= n;
                    a
                })
                .collect()
        })
        .collect()
}

/// A logged dataset on a random env, with its behavior and evaluation
/// policies.
fn scenario(
    n_actions: usize,
    slate_size: usize,
    s: RewardStructure,
    g: InteractionKind,
    lambda: f64,
    n: usize,
    seed: u64,
) -> (LoggedDataset, Policy, Policy) {
    let env = env(n_actions, slate_size, s, g, seed);
    let b = make_behavior_policy(3, n_actions, slate_size, &mut rng::stream(seed, 1)).unwrap();
    let e: Policy = make_evaluation_policy(&b, lambda).unwrap().into();
    let b: Policy = b.into();
    let data = env.generate_dataset(&b, n, &mut rng::stream(seed, 2)).unwrap();
    (data, b, e)
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn slate_reward_is_linear(
        alpha in prop::collection::vec(0.0f64..3.0, 1..8),
        seed in any::<u64>(),
    ) {
        let l = alpha.len();
        let mut r = rng::seeded(seed);
        let r1: Vec<f64> = (0..l).map(|_| r.random_range(-2.0..2.0)).collect();
        let r2: Vec<f64> = (0..l).map(|_| r.random_range(-2.0..2.0)).collect();
        let sum: Vec<f64> = r1.iter().zip(&r2).map(|(a, b)| a + b).collect();
        let a = AlphaWeights::new(alpha).unwrap();
        let f = |v: &[f64]| slate_reward(&RewardVector::new(v.to_vec()).unwrap(), &a).unwrap();
        prop_assert!((f(&sum) - f(&r1) - f(&r2)).abs() < 1e-12);
    }

    #[test]
    fn dcg_weights_strictly_decrease(l in 2usize..40) {
        let w = make_alpha_weights(&AlphaKind::Dcg, l).unwrap();
        prop_assert!(w.values().windows(2).all(|p| p[1] < p[0]));
    }

    #[test]
    fn dataset_rejects_mismatched_records(l in 1usize..5, d in 1usize..4, bad_l in any::<bool>()) {
        let record = |l: usize, d: usize| {
            LoggedRecord::new(
                Context::new(vec![0.0; d]).unwrap(),
                SlateAction::new(vec![0; l], 2).unwrap(),
                RewardVector::new(vec![0.0; l]).unwrap(),
                None,
            )
            .unwrap()
        };
        let bad = if bad_l { record(l + 1, d) } else { record(l, d + 1) };
        let alpha = make_alpha_weights(&AlphaKind::Uniform, l).unwrap();
        prop_assert!(LoggedDataset::new(vec![record(l, d)], l, 2, alpha.clone()).is_ok());
        prop_assert!(LoggedDataset::new(vec![record(l, d), bad], l, 2, alpha).is_err());
    }

    #[test]
    fn softmax_offset_is_inert(
        seed in any::<u64>(),
        lambda in -0.99f64..0.99,
        x in prop::collection::vec(-3.0f64..3.0, 3),
    ) {
        let b = make_behavior_policy(3, 4, 3, &mut rng::seeded(seed)).unwrap();
        let with: Policy = make_evaluation_policy(&b, lambda).unwrap().into();
        let without: Policy =
            FactorizableSoftmaxPolicy::new(b.scorer.clone(), 3, lambda, 0.0).unwrap().into();
        let x = context(&x);
        for a in all_slates(4, 3) {
            let s = SlateAction::new(a, 4).unwrap();
            let d = (with.slate_pmf(&x, &s).unwrap() - without.slate_pmf(&x, &s).unwrap()).abs();
            prop_assert!(d < 1e-12);
        }
    }

    #[test]
    fn factorizable_pmf_is_a_product(seed in any::<u64>(), x in prop::collection::vec(-3.0f64..3.0, 3)) {
        let p: Policy = make_behavior_policy(3, 3, 3, &mut rng::seeded(seed)).unwrap().into();
        let x = context(&x);
        for a in all_slates(3, 3) {
            let prod: f64 = (0..3)
                .map(|l| p.conditional_pmf(&x, &a[..l]).unwrap()[a[l]])
                .product();
            let s = SlateAction::new(a, 3).unwrap();
            prop_assert_eq!(p.slate_pmf(&x, &s).unwrap(), prod);
        }
    }

    #[test]
    fn plackett_luce_mass_and_marginals(
        seed in any::<u64>(),
        n_actions in 3usize..6,
        l in 1usize..4,
        x in prop::collection::vec(-2.0f64..2.0, 3),
    ) {
        let mut r = rng::seeded(seed);
        let theta = (0..n_actions)
            .map(|_| (0..3).map(|_| r.random_range(-1.0..1.0)).collect())
            .collect();
        let bias = (0..n_actions).map(|_| r.random_range(-1.0..1.0)).collect();
        let scorer = LinearScorer::new(theta, bias).unwrap();
        let p: Policy = PlackettLucePolicy::new(scorer, l).unwrap().into();
        let x = context(&x);
        let total: f64 = all_slates(n_actions, l)
            .into_iter()
            .map(|a| p.slate_pmf(&x, &SlateAction::new(a, n_actions).unwrap()).unwrap())
            .sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
        for slot in 0..l {
            let m = p.marginal_slot_pmf(&x, slot).unwrap();
            prop_assert!((m.probs.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn slot_means_respect_the_structure(
        s in structure(),
        g in interaction(),
        seed in any::<u64>(),
        x in prop::collection::vec(-2.0f64..2.0, 3),
    ) {
        let e = env(3, 3, s, g, seed);
        let x = context(&x);
        let slates = all_slates(3, 3);
        let q = |a: &[usize]| {
            e.slot_mean_rewards(&x, &SlateAction::new(a.to_vec(), 3).unwrap()).unwrap()
        };
        for a in &slates {
            let qa = q(a);
            let value: f64 = qa.iter().zip(e.alpha().values()).map(|(q, w)| q * w).sum();
            prop_assert!(qa.iter().all(|&v| v > 0.0 && v < 1.0));
            prop_assert!(value > 0.0 && value < e.alpha().total());
            for b in &slates {
                let qb = q(b);
                for l in 0..3 {
                    let shared = match s {
                        RewardStructure::Cascade => a[..=l] == b[..=l],
                        RewardStructure::Independence => a[l] == b[l],
                        RewardStructure::Standard => false,
                    };
                    if shared {
                        prop_assert_eq!(qa[l], qb[l]);
                    }
                }
            }
        }
    }

    #[test]
    fn additive_standard_pair_is_symmetric(seed in any::<u64>(), i in 0usize..4, j in 0usize..4) {
        let e = env(4, 2, RewardStructure::Standard, InteractionKind::Additive, seed);
        let x = context(&[0.3, -0.2, 1.0]);
        let f = |a: Vec<usize>, l| {
            e.interaction_term(&x, &SlateAction::new(a, 4).unwrap(), l).unwrap()
        };
        prop_assert_eq!(f(vec![i, j], 0), f(vec![j, i], 1));
        prop_assert_eq!(f(vec![i, j], 0), f(vec![i, j], 1));
    }

    #[test]
    fn zero_baseline_collapses_to_rips(
        s in structure(),
        g in interaction(),
        lambda in prop::sample::select(vec![-0.8, -0.4, 0.0, 0.4, 0.8]),
        l in 1usize..5,
        seed in any::<u64>(),
    ) {
        let (data, b, e) = scenario(4, l, s, g, lambda, 40, seed);
        let src = BehaviorSource::Policy(&b);
        let cdr = cascade_dr_estimate(&data, &e, src, &ZeroBaseline { slate_size: l }).unwrap();
        let rips = estimate(EstimatorKind::Rips, &data, &e, src, None).unwrap();
        prop_assert!(max_diff(&cdr.per_record, &rips.per_record) <= 1e-12);
    }

    #[test]
    fn single_slot_estimators_agree(s in structure(), lambda in -0.8f64..0.8, seed in any::<u64>()) {
        let (data, b, e) = scenario(5, 1, s, InteractionKind::Additive, lambda, 40, seed);
        let src = BehaviorSource::Policy(&b);
        let ips = estimate(EstimatorKind::Ips, &data, &e, src, None).unwrap().per_record;
        for kind in [EstimatorKind::Iips, EstimatorKind::Rips] {
            let other = estimate(kind, &data, &e, src, None).unwrap().per_record;
            prop_assert!(max_diff(&ips, &other) <= 1e-12);
        }
    }

    #[test]
    fn identical_policies_give_the_on_policy_mean(
        s in structure(),
        l in 1usize..5,
        seed in any::<u64>(),
    ) {
        let (data, b, _) = scenario(4, l, s, InteractionKind::Decay, 0.0, 40, seed);
        let on = on_policy_estimate(&data).unwrap().per_record;
        for kind in [EstimatorKind::Ips, EstimatorKind::Iips, EstimatorKind::Rips] {
            let r = estimate(kind, &data, &b, BehaviorSource::Logged, None).unwrap();
            prop_assert_eq!(&r.per_record, &on);
        }
    }

    #[test]
    fn constant_baseline_identity(
        c in -2.0f64..2.0,
        l in 1usize..5,
        lambda in -0.8f64..0.8,
        seed in any::<u64>(),
    ) {
        let (data, b, e) =
            scenario(4, l, RewardStructure::Cascade, InteractionKind::Additive, lambda, 30, seed);
        let src = BehaviorSource::Policy(&b);
        let constant = ConstantBaseline { slate_size: l, value: c };
        let cdr = cascade_dr_estimate(&data, &e, src, &constant).unwrap();
        let rips = estimate(EstimatorKind::Rips, &data, &e, src, None).unwrap();
        for (i, record) in data.records().iter().enumerate() {
            // RIPS + c Σ_l (w_{1:l-1} - w_{1:l}) with w_{1:0} = 1
            let w = importance_weights(record, i, &e, src).unwrap().cumulative;
            let correction: f64 = (0..l)
                .map(|k| if k == 0 { 1.0 } else { w[k - 1] } - w[k])
                .sum();
            let expected = rips.per_record[i] + c * correction;
            prop_assert!((cdr.per_record[i] - expected).abs() <= 1e-9 * (1.0 + expected.abs()));
        }
    }
}

#[test]
fn recursion_matches_enumeration_on_small_shapes() {
    // slate sizes 1 to 3 with two or three actions, wider than the oracle grid
    let mut worst = 0.0f64;
    for n_actions in [2, 3] {
        for l in 1..=3 {
            for s in RewardStructure::ALL {
                for g in InteractionKind::ALL {
                    for seed in 0..10 {
                        let spec = TinySpec::new(n_actions, l, s, g, seed);
                        let inst = TinyInstance::generate(&spec).unwrap();
                        let table = QTable::random(&inst, -1.0, 2.0, &mut rng::seeded(seed));
                        for baseline in [None, Some(&table as &dyn Baseline)] {
                            let exact =
                                exact_estimator_variance(&inst, EstimatorKind::CascadeDr, baseline)
                                    .unwrap();
                            let rec = recursive_variance(&inst, baseline).unwrap();
                            worst = worst.max((exact - rec).abs());
                        }
                    }
                }
            }
        }
    }
    assert!(worst <= 1e-10, "{worst}");
}

#[test]
fn fitted_baseline_reduces_sample_variance() {
    // cascade, λ = -0.4, n = 1000, 500 replications on one instance
    let cfg = EnvConfig::standard_setup(5, RewardStructure::Cascade, InteractionKind::Decay).unwrap();
    let env = SyntheticEnv::sample(cfg, &mut rng::seeded(404)).unwrap();
    let b = make_behavior_policy(5, 5, 5, &mut rng::seeded(405)).unwrap();
    let e: Policy = make_evaluation_policy(&b, -0.4).unwrap().into();
    let b: Policy = b.into();
    let src = BehaviorSource::Policy(&b);
    let (mut cdr, mut rips) = (Vec::new(), Vec::new());
    for rep in 0..500 {
        let data = env.generate_dataset(&b, 1000, &mut rng::stream(406, rep)).unwrap();
        let q = fit_q_model(&data, &e, src, LearnerConfig::default(), CrossFit::None).unwrap();
        cdr.push(cascade_dr_estimate(&data, &e, src, &q).unwrap().value);
        rips.push(estimate(EstimatorKind::Rips, &data, &e, src, None).unwrap().value);
    }
    let var = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
    };
    let (vc, vr) = (var(&cdr), var(&rips));
    assert!(vc < vr, "Cascade-DR {vc} vs RIPS {vr}");
}

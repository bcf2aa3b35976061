//! Exact oracles on tiny instances.
//!
//! Everything here enumerates the full outcome space `(a, r)` instead of
//! sampling, so estimator moments, true `Q_l` tables and the recursive
//! variance can be compared to machine precision.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{contribution, Baseline, BehaviorSource, EstimatorKind};
use crate::policy::{make_behavior_policy, make_evaluation_policy, Policy, LAMBDA_GRID};
use crate::rng;
use crate::synth::{EnvConfig, InteractionKind, RewardStructure, SyntheticEnv, TruthMode};
use crate::types::{
    make_alpha_weights, AlphaKind, Context, LoggedDataset, LoggedRecord, RewardVector,
    SlateAction,
};

/// Largest `|A|^L · 2^L` the oracles will enumerate.
pub const ORACLE_ENUMERATION_LIMIT: u128 = 1 << 20;

/// Parameters of a generated tiny instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TinySpec {
    pub n_actions: usize,
    pub slate_size: usize,
    pub reward_structure: RewardStructure,
    pub interaction_kind: InteractionKind,
    pub seed: u64,
    pub n_contexts: usize,
    /// Defaults to the policy-similarity grid entry `seed mod 9`.
    pub lambda: Option<f64>,
}

impl TinySpec {
    pub fn new(
        n_actions: usize,
        slate_size: usize,
        reward_structure: RewardStructure,
        interaction_kind: InteractionKind,
        seed: u64,
    ) -> Self {
        Self {
            n_actions,
            slate_size,
            reward_structure,
            interaction_kind,
            seed,
            n_contexts: 2,
            lambda: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TinyInstance {
    pub env: SyntheticEnv,
    pub contexts: Vec<Context>,
    pub behavior: Policy,
    pub evaluation: Policy,
}

fn outcome_count(n_actions: usize, slate_size: usize) -> u128 {
    (n_actions as u128)
        .saturating_pow(slate_size as u32)
        .saturating_mul(1u128 << slate_size.min(100))
}

impl TinyInstance {
    pub fn new(
        env: SyntheticEnv,
        contexts: Vec<Context>,
        behavior: Policy,
        evaluation: Policy,
    ) -> Result<Self> {
        let size = outcome_count(env.n_actions(), env.slate_size());
        if size > ORACLE_ENUMERATION_LIMIT {
            return Err(Error::EnumerationTooLarge {
                size,
                limit: ORACLE_ENUMERATION_LIMIT,
            });
        }
        if contexts.is_empty() {
            return Err(Error::InvalidConfig("tiny instance needs a context".into()));
        }
        if let Some(x) = contexts.iter().find(|x| x.dim() != env.dim()) {
            return Err(Error::DimensionMismatch {
                expected: env.dim(),
                found: x.dim(),
            });
        }
        env.check_policy(&behavior)?;
        env.check_policy(&evaluation)?;
        Ok(Self {
            env,
            contexts,
            behavior,
            evaluation,
        })
    }

    /// Environment, contexts and policies drawn from independent streams of
    /// `spec.seed`, with `d = 5` and unit slot weights.
    pub fn generate(spec: &TinySpec) -> Result<Self> {
        let size = outcome_count(spec.n_actions, spec.slate_size);
        if size > ORACLE_ENUMERATION_LIMIT {
            return Err(Error::EnumerationTooLarge {
                size,
                limit: ORACLE_ENUMERATION_LIMIT,
            });
        }
        let config = EnvConfig {
            dim: 5,
            n_actions: spec.n_actions,
            slate_size: spec.slate_size,
            alpha: make_alpha_weights(&AlphaKind::Uniform, spec.slate_size)?,
            reward_structure: spec.reward_structure,
            interaction_kind: spec.interaction_kind,
            interaction_scale: 1.0,
        };
        let env = SyntheticEnv::sample(config, &mut rng::stream(spec.seed, 0))?;
        let behavior = make_behavior_policy(
            5,
            spec.n_actions,
            spec.slate_size,
            &mut rng::stream(spec.seed, 1),
        )?;
        let lambda = spec
            .lambda
            .unwrap_or(LAMBDA_GRID[(spec.seed % LAMBDA_GRID.len() as u64) as usize]);
        let evaluation = make_evaluation_policy(&behavior, lambda)?;
        let contexts = env.sample_contexts(spec.n_contexts, &mut rng::stream(spec.seed, 2))?;
        Self::new(env, contexts, behavior.into(), evaluation.into())
    }

    pub fn n_actions(&self) -> usize {
        self.env.n_actions()
    }

    pub fn slate_size(&self) -> usize {
        self.env.slate_size()
    }

    fn n_slates(&self) -> usize {
        self.n_actions().pow(self.slate_size() as u32)
    }
}

fn decode(mut code: usize, n: usize, len: usize) -> Vec<usize> {
    let mut out = vec![0; len];
    for slot in (0..len).rev() {
        out[slot] = code % n;
        code /= n;
    }
    out
}

fn encode(prefix: &[usize], n: usize) -> usize {
    prefix.iter().fold(0, |c, &a| c * n + a)
}

/// Exact `q_l`, tail values `V^{L-l}`, `Q_l = α_l q_l + V^{L-l}` and
/// `V(π_e)` under the evaluation policy.
///
/// Under the standard structure `q_l` depends on later slots as well; the
/// table then holds its expectation over `a_{l+1:L} ~ π_e`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueValues {
    n_actions: usize,
    slate_size: usize,
    /// `[context][l - 1][code(a_{1:l})]`.
    q: Vec<Vec<Vec<f64>>>,
    /// `[context][l][code(a_{1:l})]` holding `V^{L-l}`, `l = 0..=L`.
    tail: Vec<Vec<Vec<f64>>>,
    alpha: Vec<f64>,
    per_context: Vec<f64>,
}

impl TrueValues {
    pub fn q(&self, context: usize, prefix: &[usize]) -> f64 {
        self.q[context][prefix.len() - 1][encode(prefix, self.n_actions)]
    }

    /// `V^{L-l}(x, a_{1:l})` with `l = prefix.len()`.
    pub fn tail(&self, context: usize, prefix: &[usize]) -> f64 {
        self.tail[context][prefix.len()][encode(prefix, self.n_actions)]
    }

    /// `Q_l(x, a_{1:l})` with `l = prefix.len() >= 1`.
    pub fn big_q(&self, context: usize, prefix: &[usize]) -> f64 {
        self.alpha[prefix.len() - 1] * self.q(context, prefix) + self.tail(context, prefix)
    }

    pub fn context_value(&self, context: usize) -> f64 {
        self.per_context[context]
    }

    /// `V(π_e)` averaged over the instance contexts.
    pub fn value(&self) -> f64 {
        self.per_context.iter().sum::<f64>() / self.per_context.len() as f64
    }

    pub fn slate_size(&self) -> usize {
        self.slate_size
    }
}

pub fn true_q_values(instance: &TinyInstance) -> Result<TrueValues> {
    let n = instance.n_actions();
    let l_max = instance.slate_size();
    let env = &instance.env;
    let alpha = env.alpha().values().to_vec();
    let by_context = instance
        .contexts
        .iter()
        .map(|x| {
            let pmf = instance.evaluation.at(x)?;
            let base = env.base_rewards(x)?;
            let mut q: Vec<Vec<f64>> = (1..=l_max).map(|l| vec![0.0; n.pow(l as u32)]).collect();
            match env.reward_structure() {
                RewardStructure::Standard => {
                    for code in 0..instance.n_slates() {
                        let a = decode(code, n, l_max);
                        for l in 0..l_max {
                            let cont: f64 = (l + 1..l_max).map(|k| pmf.prob(&a[..k], a[k])).product();
                            if cont == 0.0 {
                                continue;
                            }
                            q[l][encode(&a[..=l], n)] += cont * env.slot_mean_from_base(&base, &a, l);
                        }
                    }
                }
                RewardStructure::Cascade | RewardStructure::Independence => {
                    for (l, level) in q.iter_mut().enumerate() {
                        for (code, v) in level.iter_mut().enumerate() {
                            let prefix = decode(code, n, l + 1);
                            *v = env.slot_mean_from_base(&base, &prefix, l);
                        }
                    }
                }
            }
            let mut tail: Vec<Vec<f64>> = (0..=l_max).map(|l| vec![0.0; n.pow(l as u32)]).collect();
            for l in (1..=l_max).rev() {
                for code in 0..n.pow(l as u32 - 1) {
                    let prefix = decode(code, n, l - 1);
                    let mut total = 0.0;
                    for a in 0..n {
                        let p = pmf.prob(&prefix, a);
                        if p == 0.0 {
                            continue;
                        }
                        let child = code * n + a;
                        total += p * (alpha[l - 1] * q[l - 1][child] + tail[l][child]);
                    }
                    tail[l - 1][code] = total;
                }
            }
            Ok((q, tail))
        })
        .collect::<Result<Vec<_>>>()?;
    let (q, tail): (Vec<_>, Vec<_>) = by_context.into_iter().unzip();
    let per_context = tail.iter().map(|t: &Vec<Vec<f64>>| t[0][0]).collect();
    Ok(TrueValues {
        n_actions: n,
        slate_size: l_max,
        q,
        tail,
        alpha,
        per_context,
    })
}

/// Explicit `Q̂_l(x, a_{1:l})` lookup table over the instance contexts.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    contexts: Vec<Context>,
    n_actions: usize,
    slate_size: usize,
    /// `[context][l - 1][code(a_{1:l})]`.
    values: Vec<Vec<Vec<f64>>>,
}

impl QTable {
    fn filled(instance: &TinyInstance, mut f: impl FnMut(usize, &[usize]) -> f64) -> Self {
        let n = instance.n_actions();
        let values = (0..instance.contexts.len())
            .map(|c| {
                (1..=instance.slate_size())
                    .map(|l| {
                        (0..n.pow(l as u32))
                            .map(|code| f(c, &decode(code, n, l)))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self {
            contexts: instance.contexts.clone(),
            n_actions: n,
            slate_size: instance.slate_size(),
            values,
        }
    }

    pub fn zeros(instance: &TinyInstance) -> Self {
        Self::filled(instance, |_, _| 0.0)
    }

    /// `Q̂ = Q` exactly.
    pub fn from_true(instance: &TinyInstance, truth: &TrueValues) -> Self {
        Self::filled(instance, |c, prefix| truth.big_q(c, prefix))
    }

    /// Entries i.i.d. uniform on `[low, high)`.
    pub fn random<R: Rng + ?Sized>(instance: &TinyInstance, low: f64, high: f64, rng: &mut R) -> Self {
        Self::filled(instance, |_, _| rng.random_range(low..high))
    }

    /// `Q̂ = u · Q` with `u` uniform on the open interval `(0, 2)`, so that
    /// `0 < Q̂_l < 2 Q_l` entrywise.
    pub fn random_within<R: Rng + ?Sized>(
        instance: &TinyInstance,
        truth: &TrueValues,
        rng: &mut R,
    ) -> Self {
        Self::filled(instance, |c, prefix| {
            let u = loop {
                let u: f64 = rng.random_range(0.0..2.0);
                if u > 0.0 {
                    break u;
                }
            };
            u * truth.big_q(c, prefix)
        })
    }

    pub fn get(&self, context: usize, prefix: &[usize]) -> f64 {
        self.values[context][prefix.len() - 1][encode(prefix, self.n_actions)]
    }
}

impl Baseline for QTable {
    fn slate_size(&self) -> usize {
        self.slate_size
    }

    fn predict(&self, _record: usize, x: &Context, prefix: &[usize]) -> Result<f64> {
        let c = self
            .contexts
            .iter()
            .position(|c| c == x)
            .ok_or_else(|| Error::InvalidConfig("context is not covered by the Q table".into()))?;
        if prefix.is_empty() || prefix.len() > self.slate_size {
            return Err(Error::SlotOutOfRange {
                slot: prefix.len(),
                slate_size: self.slate_size,
            });
        }
        Ok(self.get(c, prefix))
    }
}

/// Exact mean and variance of a single-record estimate, per context.
fn exact_moments_per_context(
    instance: &TinyInstance,
    kind: EstimatorKind,
    baseline: Option<&dyn Baseline>,
) -> Result<Vec<(f64, f64)>> {
    let n = instance.n_actions();
    let l_max = instance.slate_size();
    let alpha = instance.env.alpha();
    instance
        .contexts
        .par_iter()
        .map(|x| {
            let pmf_b = instance.behavior.at(x)?;
            let base = instance.env.base_rewards(x)?;
            let mut outcomes = Vec::new();
            for code in 0..instance.n_slates() {
                let a = decode(code, n, l_max);
                let p_slate = pmf_b.prefix_prob(&a);
                if p_slate == 0.0 {
                    continue;
                }
                let q: Vec<f64> = (0..l_max)
                    .map(|l| instance.env.slot_mean_from_base(&base, &a, l))
                    .collect();
                let slate = SlateAction::new(a, n)?;
                for bits in 0..1usize << l_max {
                    let r: Vec<f64> = (0..l_max).map(|l| ((bits >> l) & 1) as f64).collect();
                    let p: f64 = p_slate
                        * (0..l_max)
                            .map(|l| if r[l] == 1.0 { q[l] } else { 1.0 - q[l] })
                            .product::<f64>();
                    if p == 0.0 {
                        continue;
                    }
                    let record =
                        LoggedRecord::new(x.clone(), slate.clone(), RewardVector::new(r)?, None)?;
                    let v = contribution(
                        kind,
                        &record,
                        0,
                        alpha,
                        &instance.evaluation,
                        BehaviorSource::Policy(&instance.behavior),
                        baseline,
                    )?;
                    outcomes.push((p, v));
                }
            }
            let mean: f64 = outcomes.iter().map(|(p, v)| p * v).sum();
            let var: f64 = outcomes.iter().map(|(p, v)| p * (v - mean).powi(2)).sum();
            Ok((mean, var))
        })
        .collect()
}

/// `E[V̂]` for a single logged record, averaged over the instance contexts.
///
/// The estimate is linear in records, so this is also the expectation for
/// any `n`. Cascade-DR without a baseline uses `Q̂ ≡ 0`.
pub fn exact_estimator_expectation(
    instance: &TinyInstance,
    kind: EstimatorKind,
    baseline: Option<&dyn Baseline>,
) -> Result<f64> {
    let m = exact_moments_per_context(instance, kind, baseline)?;
    Ok(m.iter().map(|(mean, _)| mean).sum::<f64>() / m.len() as f64)
}

/// Single-record variance `E[V̂^2] - E[V̂]^2` given the context, averaged
/// over the instance contexts.
pub fn exact_estimator_variance(
    instance: &TinyInstance,
    kind: EstimatorKind,
    baseline: Option<&dyn Baseline>,
) -> Result<f64> {
    let m = exact_moments_per_context(instance, kind, baseline)?;
    Ok(m.iter().map(|(_, var)| var).sum::<f64>() / m.len() as f64)
}

/// Conditional mean and variance of the Cascade-DR tail estimate at the
/// root, from the slot recursion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecursiveMoments {
    pub mean: f64,
    pub variance: f64,
}

/// Cascade-DR variance from the slot recursion, averaged over contexts.
///
/// At a prefix `h = a_{1:l-1}`, with `ρ = π_e(a | x, h) / π_b(a | x, h)` and
/// the child `h ∥ a`,
///
/// ```text
/// V_l(h) = E_a[ρ² V_{l+1}(h∥a)] + α_l² E_a[ρ² Var(r_l)]
///        + 2 α_l E_a[ρ² Cov(r_l, V̂^{L-l})] + Var_a(ρ Δ_l),   Δ_l = Q_l - Q̂_l
/// ```
///
/// where `a ~ π_b(· | x, h)` because the logged data is drawn from the
/// behavior policy, and `Q_l = α_l q_l + E[V̂^{L-l}]` uses conditional means
/// under the logging distribution. Under cascade and independence these
/// are the true `q_l` and `V^{L-l}` and the covariance vanishes. The
/// per-slate conditional means that feed the recursion are enumerated.
/// `Q̂ ≡ 0` gives the RIPS variance.
pub fn recursive_variance(instance: &TinyInstance, baseline: Option<&dyn Baseline>) -> Result<f64> {
    let m = recursive_moments(instance, baseline)?;
    Ok(m.iter().map(|r| r.variance).sum::<f64>() / m.len() as f64)
}

/// Per-context mean and variance from the slot recursion.
pub fn recursive_moments(
    instance: &TinyInstance,
    baseline: Option<&dyn Baseline>,
) -> Result<Vec<RecursiveMoments>> {
    let zero = crate::estimators::ZeroBaseline {
        slate_size: instance.slate_size(),
    };
    let baseline = baseline.unwrap_or(&zero);
    if baseline.slate_size() != instance.slate_size() {
        return Err(Error::ShapeMismatch("baseline slate size".into()));
    }
    instance
        .contexts
        .par_iter()
        .map(|x| context_recursion(instance, x, baseline))
        .collect()
}

fn context_recursion(
    instance: &TinyInstance,
    x: &Context,
    baseline: &dyn Baseline,
) -> Result<RecursiveMoments> {
    let n = instance.n_actions();
    let l_max = instance.slate_size();
    let alpha = instance.env.alpha().values();
    let pmf_b = instance.behavior.at(x)?;
    let pmf_e = instance.evaluation.at(x)?;
    let base = instance.env.base_rewards(x)?;

    // Conditional moments given a_{1:l}, indexed [l - 1][code].
    let sizes: Vec<usize> = (1..=l_max).map(|l| n.pow(l as u32)).collect();
    let mut q_bar: Vec<Vec<f64>> = sizes.iter().map(|&s| vec![0.0; s]).collect();
    let mut tail_mean = q_bar.clone();
    let mut r_tail = q_bar.clone();

    for code in 0..instance.n_slates() {
        let a = decode(code, n, l_max);
        let cond_b: Vec<f64> = (0..l_max).map(|l| pmf_b.prob(&a[..l], a[l])).collect();
        if cond_b.contains(&0.0) {
            continue;
        }
        let q: Vec<f64> = (0..l_max)
            .map(|l| instance.env.slot_mean_from_base(&base, &a, l))
            .collect();
        let mut ebar = vec![0.0; l_max];
        let mut q_hat = vec![0.0; l_max];
        for l in 0..l_max {
            ebar[l] = baseline.expected(0, x, &a[..l], &pmf_e.pmf(&a[..l]))?;
            q_hat[l] = baseline.predict(0, x, &a[..=l])?;
        }
        // tail[l]: mean of the estimate from slots after l given the full slate
        let mut tail = vec![0.0; l_max];
        for l in (0..l_max - 1).rev() {
            let k = l + 1;
            let rho = pmf_e.prob(&a[..k], a[k]) / cond_b[k];
            tail[l] = rho * (alpha[k] * q[k] + tail[k] - q_hat[k]) + ebar[k];
        }
        // continuation probability π_b(a_{l+1:L} | a_{1:l})
        let mut cont = 1.0;
        for l in (0..l_max).rev() {
            let c = encode(&a[..=l], n);
            q_bar[l][c] += cont * q[l];
            tail_mean[l][c] += cont * tail[l];
            r_tail[l][c] += cont * q[l] * tail[l];
            cont *= cond_b[l];
        }
    }

    // variance and mean of the tail estimate at every prefix, bottom up
    let mut var_next: Vec<f64> = vec![0.0; n.pow(l_max as u32)];
    let mut root = RecursiveMoments {
        mean: 0.0,
        variance: 0.0,
    };
    for l in (1..=l_max).rev() {
        let mut var_here = vec![0.0; n.pow(l as u32 - 1)];
        for (code, slot_var) in var_here.iter_mut().enumerate() {
            let h = decode(code, n, l - 1);
            let (mut spread, mut second, mut first) = (0.0, 0.0, 0.0);
            for a in 0..n {
                let pb = pmf_b.prob(&h, a);
                let pe = pmf_e.prob(&h, a);
                if pb == 0.0 {
                    if pe > 0.0 {
                        return Err(Error::ZeroPropensity {
                            record: 0,
                            slot: l - 1,
                        });
                    }
                    continue;
                }
                let rho = pe / pb;
                let child = code * n + a;
                let qb = q_bar[l - 1][child];
                let m = tail_mean[l - 1][child];
                let cov = r_tail[l - 1][child] - qb * m;
                let mut prefix = h.clone();
                prefix.push(a);
                let delta = alpha[l - 1] * qb + m - baseline.predict(0, x, &prefix)?;
                spread += pb
                    * rho
                    * rho
                    * (alpha[l - 1].powi(2) * qb * (1.0 - qb) + var_next[child] + 2.0 * alpha[l - 1] * cov);
                second += pb * rho * rho * delta * delta;
                first += pb * rho * delta;
            }
            *slot_var = spread + second - first * first;
            if l == 1 {
                root = RecursiveMoments {
                    mean: baseline.expected(0, x, &[], &pmf_e.pmf(&[]))? + first,
                    variance: *slot_var,
                };
            }
        }
        var_next = var_here;
    }
    Ok(root)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloMoments {
    pub mean: f64,
    pub variance: f64,
    pub mean_std_error: f64,
    pub variance_std_error: f64,
}

/// Sample mean and variance of an estimator over `replications`
/// independent datasets of size `n`, with contexts drawn uniformly from
/// the instance contexts.
pub fn monte_carlo_moments(
    instance: &TinyInstance,
    kind: EstimatorKind,
    baseline: Option<&dyn Baseline>,
    n: usize,
    replications: usize,
    seed: u64,
) -> Result<MonteCarloMoments> {
    if n == 0 || replications < 2 {
        return Err(Error::InvalidConfig(
            "Monte Carlo moments need n >= 1 and at least two replications".into(),
        ));
    }
    let estimates = (0..replications)
        .into_par_iter()
        .map(|rep| {
            let mut rng = rng::stream(seed, rep as u64);
            let records = (0..n)
                .map(|_| {
                    let x = instance.contexts[rng.random_range(0..instance.contexts.len())].clone();
                    let slate = instance.behavior.sample_slate(&x, &mut rng)?;
                    let rewards = instance.env.sample_rewards(&x, &slate, &mut rng)?;
                    LoggedRecord::new(x, slate, rewards, None)
                })
                .collect::<Result<Vec<_>>>()?;
            let data = LoggedDataset::new(
                records,
                instance.slate_size(),
                instance.n_actions(),
                instance.env.alpha().clone(),
            )?;
            crate::estimators::estimate(
                kind,
                &data,
                &instance.evaluation,
                BehaviorSource::Policy(&instance.behavior),
                baseline,
            )
            .map(|r| r.value)
        })
        .collect::<Result<Vec<f64>>>()?;
    let r = replications as f64;
    let mean = estimates.iter().sum::<f64>() / r;
    let m2 = estimates.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / r;
    let m4 = estimates.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / r;
    let variance = m2 * r / (r - 1.0);
    Ok(MonteCarloMoments {
        mean,
        variance,
        mean_std_error: (variance / r).sqrt(),
        variance_std_error: ((m4 - m2 * m2).max(0.0) / r).sqrt(),
    })
}

/// Outcome of one oracle check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// `(|A|, L)` shapes of the tiny-instance grid.
pub const TINY_SHAPES: [(usize, usize); 3] = [(2, 2), (3, 2), (2, 3)];
/// Seeds per shape in the tiny-instance grid.
pub const TINY_SEEDS: u64 = 10;
/// Random `Q̂` tables tried per instance.
pub const RANDOM_TABLES: u64 = 5;

/// Every tiny instance: shapes × seeds × reward structures × interactions.
pub fn tiny_grid() -> Vec<TinySpec> {
    let mut specs = Vec::new();
    for &(n, l) in &TINY_SHAPES {
        for seed in 0..TINY_SEEDS {
            for structure in RewardStructure::ALL {
                for kind in InteractionKind::ALL {
                    specs.push(TinySpec::new(n, l, structure, kind, seed));
                }
            }
        }
    }
    specs
}

fn random_tables(instance: &TinyInstance, seed: u64) -> Vec<QTable> {
    (0..RANDOM_TABLES)
        .map(|t| QTable::random(instance, -2.0, 2.0, &mut rng::stream(seed, 100 + t)))
        .collect()
}

fn bounded_tables(instance: &TinyInstance, truth: &TrueValues, seed: u64) -> Vec<QTable> {
    (0..RANDOM_TABLES)
        .map(|t| QTable::random_within(instance, truth, &mut rng::stream(seed, 200 + t)))
        .collect()
}

struct GridCase {
    spec: TinySpec,
    instance: TinyInstance,
    truth: TrueValues,
}

fn grid_cases() -> Result<Vec<GridCase>> {
    tiny_grid()
        .into_par_iter()
        .map(|spec| {
            let instance = TinyInstance::generate(&spec)?;
            let truth = true_q_values(&instance)?;
            Ok(GridCase {
                spec,
                instance,
                truth,
            })
        })
        .collect()
}

fn describe(spec: &TinySpec) -> String {
    format!(
        "|A|={} L={} {} {} seed={}",
        spec.n_actions, spec.slate_size, spec.reward_structure, spec.interaction_kind, spec.seed
    )
}

/// `V(π_e)` from the backward recursion agrees with the environment's
/// slate enumeration.
pub fn truth_consistency_check() -> Result<CheckOutcome> {
    let cases = grid_cases()?;
    let mut worst = 0.0f64;
    for c in &cases {
        let direct = c
            .instance
            .env
            .true_policy_value(&c.instance.evaluation, &c.instance.contexts, TruthMode::Exact)?;
        worst = worst.max((direct - c.truth.value()).abs());
    }
    Ok(CheckOutcome {
        name: "true values agree with slate enumeration".into(),
        passed: worst <= 1e-12,
        detail: format!("{} instances, max |diff| = {worst:.3e}", cases.len()),
    })
}

/// `E[V̂] = V(π_e)` wherever the estimator's assumption holds: IPS always,
/// RIPS and Cascade-DR (random tables) under cascade and independence,
/// IIPS under independence.
pub fn unbiasedness_check() -> Result<CheckOutcome> {
    let cases = grid_cases()?;
    let results = cases
        .par_iter()
        .map(|c| {
            let v = c.truth.value();
            let mut devs = vec![(
                "IPS",
                (exact_estimator_expectation(&c.instance, EstimatorKind::Ips, None)? - v).abs(),
            )];
            if c.spec.reward_structure != RewardStructure::Standard {
                devs.push((
                    "RIPS",
                    (exact_estimator_expectation(&c.instance, EstimatorKind::Rips, None)? - v).abs(),
                ));
                for table in random_tables(&c.instance, c.spec.seed) {
                    let e = exact_estimator_expectation(
                        &c.instance,
                        EstimatorKind::CascadeDr,
                        Some(&table),
                    )?;
                    devs.push(("Cascade-DR", (e - v).abs()));
                }
            }
            if c.spec.reward_structure == RewardStructure::Independence {
                devs.push((
                    "IIPS",
                    (exact_estimator_expectation(&c.instance, EstimatorKind::Iips, None)? - v).abs(),
                ));
            }
            Ok((describe(&c.spec), devs))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut worst = (0.0f64, String::new());
    let mut count = 0;
    for (name, devs) in &results {
        for (est, d) in devs {
            count += 1;
            if *d > worst.0 {
                worst = (*d, format!("{est} on {name}"));
            }
        }
    }
    Ok(CheckOutcome {
        name: "unbiasedness where the reward assumption holds".into(),
        passed: worst.0 <= 1e-10,
        detail: format!(
            "{count} comparisons, max |E - V| = {:.3e} ({})",
            worst.0, worst.1
        ),
    })
}

/// Instances where a violated assumption biases the estimator: IIPS under
/// cascade and RIPS under the standard structure.
pub fn bias_witness_check() -> Result<CheckOutcome> {
    let cases = grid_cases()?;
    let mut iips = (0.0f64, String::new());
    let mut rips = (0.0f64, String::new());
    for c in &cases {
        let v = c.truth.value();
        match c.spec.reward_structure {
            RewardStructure::Cascade => {
                let d = (exact_estimator_expectation(&c.instance, EstimatorKind::Iips, None)? - v).abs();
                if d > iips.0 {
                    iips = (d, describe(&c.spec));
                }
            }
            RewardStructure::Standard => {
                let d = (exact_estimator_expectation(&c.instance, EstimatorKind::Rips, None)? - v).abs();
                if d > rips.0 {
                    rips = (d, describe(&c.spec));
                }
            }
            RewardStructure::Independence => {}
        }
    }
    Ok(CheckOutcome {
        name: "bias witnesses for violated assumptions".into(),
        passed: iips.0 > 1e-4 && rips.0 > 1e-4,
        detail: format!(
            "IIPS under cascade |bias| = {:.3e} ({}); RIPS under standard |bias| = {:.3e} ({})",
            iips.0, iips.1, rips.0, rips.1
        ),
    })
}

/// The slot recursion reproduces the enumerated Cascade-DR variance for
/// `Q̂ ≡ 0` and random tables.
pub fn variance_identity_check() -> Result<CheckOutcome> {
    let cases = grid_cases()?;
    let worst = cases
        .par_iter()
        .map(|c| {
            let zero = QTable::zeros(&c.instance);
            let mut tables = vec![zero];
            tables.extend(random_tables(&c.instance, c.spec.seed));
            let mut worst = (0.0f64, String::new());
            for (t, table) in tables.iter().enumerate() {
                let exact =
                    exact_estimator_variance(&c.instance, EstimatorKind::CascadeDr, Some(table))?;
                let rec = recursive_variance(&c.instance, Some(table))?;
                let d = (exact - rec).abs();
                if d > worst.0 {
                    worst = (d, format!("{} table {t}", describe(&c.spec)));
                }
            }
            Ok(worst)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold((0.0f64, String::new()), |a, b| if b.0 > a.0 { b } else { a });
    Ok(CheckOutcome {
        name: "recursive variance matches enumerated variance".into(),
        passed: worst.0 <= 1e-10,
        detail: format!(
            "{} instances x {} tables, max |diff| = {:.3e} ({})",
            cases.len(),
            RANDOM_TABLES + 1,
            worst.0,
            worst.1
        ),
    })
}

/// `Var(Q̂) <= Var(0)` for tables with `0 < Q̂_l < 2 Q_l`.
pub fn variance_dominance_check() -> Result<CheckOutcome> {
    let cases = grid_cases()?;
    let rows = cases
        .par_iter()
        .map(|c| {
            let rips = recursive_variance(&c.instance, None)?;
            let mut out = Vec::new();
            for (t, table) in bounded_tables(&c.instance, &c.truth, c.spec.seed)
                .iter()
                .enumerate()
            {
                let dr = recursive_variance(&c.instance, Some(table))?;
                out.push((dr - rips, format!("{} table {t}", describe(&c.spec)), dr, rips));
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let all: Vec<_> = rows.into_iter().flatten().collect();
    let violations: Vec<_> = all.iter().filter(|(d, ..)| *d > 1e-12).collect();
    let detail = match violations
        .iter()
        .max_by(|a, b| a.0.total_cmp(&b.0))
    {
        None => format!("{} tables, no violations", all.len()),
        Some((d, name, dr, rips)) => format!(
            "{} of {} tables increase the variance; worst {name}: {dr:.6} vs {rips:.6} (+{d:.3e})",
            violations.len(),
            all.len()
        ),
    };
    Ok(CheckOutcome {
        name: "bounded baseline error never increases variance".into(),
        passed: violations.is_empty(),
        detail,
    })
}

/// All oracle checks in a fixed order.
pub fn run_oracle_suite() -> Result<Vec<CheckOutcome>> {
    Ok(vec![
        truth_consistency_check()?,
        unbiasedness_check()?,
        bias_witness_check()?,
        variance_identity_check()?,
        variance_dominance_check()?,
    ])
}

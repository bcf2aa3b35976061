//! Ranking policies: distributions over slates given a context.
//!
//! Three families are provided:
//!
//! * [`FactorizableSoftmaxPolicy`]: every slot draws independently from the
//!   same softmax over linear scores, so duplicates are possible. The
//!   synthetic behavior policy and the similarity-controlled evaluation
//!   policy are both of this kind.
//! * [`PlackettLucePolicy`]: slots are filled top-down without replacement,
//!   renormalizing the softmax over the actions not yet placed.
//! * [`UniformPolicy`]: every slot is uniform over all actions.
//!
//! All probabilities are computed with max-logit subtraction.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::types::{Context, SlateAction};

/// Largest `|A|^L` for which Plackett-Luce marginals are enumerated exactly.
pub const MARGINAL_ENUMERATION_LIMIT: u128 = 1_000_000;
/// Sample count for Monte Carlo marginals above the enumeration limit.
pub const MARGINAL_MC_SAMPLES: usize = 100_000;

/// Policy-similarity values `λ` used to build evaluation policies.
pub const LAMBDA_GRID: [f64; 9] = [-0.8, -0.6, -0.4, -0.2, 0.0, 0.2, 0.4, 0.6, 0.8];
const MARGINAL_MC_SEED: u64 = 0x5eed_0f_91a7;

/// Per-action linear scores `θ_a^T x + b_a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearScorer {
    pub theta: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl LinearScorer {
    pub fn new(theta: Vec<Vec<f64>>, bias: Vec<f64>) -> Result<Self> {
        let scorer = Self { theta, bias };
        scorer.validate()?;
        Ok(scorer)
    }

    fn validate(&self) -> Result<()> {
        if self.theta.is_empty() {
            return Err(Error::InvalidConfig("scorer needs at least one action".into()));
        }
        if self.theta.len() != self.bias.len() {
            return Err(Error::LengthMismatch {
                what: "scorer bias vs theta",
                expected: self.theta.len(),
                found: self.bias.len(),
            });
        }
        let dim = self.theta[0].len();
        for row in &self.theta {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
        }
        let finite = self
            .theta
            .iter()
            .flatten()
            .chain(&self.bias)
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite("scorer parameters"));
        }
        Ok(())
    }

    pub fn n_actions(&self) -> usize {
        self.bias.len()
    }

    pub fn dim(&self) -> usize {
        self.theta[0].len()
    }

    pub fn score(&self, x: &Context, action: usize) -> f64 {
        x.dot(&self.theta[action]) + self.bias[action]
    }

    pub fn scores(&self, x: &Context) -> Result<Vec<f64>> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.dim(),
            });
        }
        Ok((0..self.n_actions()).map(|a| self.score(x, a)).collect())
    }
}

/// `π(a|x) = Π_l softmax(scale · f(x, a_l) + offset)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorizableSoftmaxPolicy {
    #[serde(flatten)]
    pub scorer: LinearScorer,
    pub slate_size: usize,
    pub logit_scale: f64,
    pub logit_offset: f64,
}

impl FactorizableSoftmaxPolicy {
    pub fn new(
        scorer: LinearScorer,
        slate_size: usize,
        logit_scale: f64,
        logit_offset: f64,
    ) -> Result<Self> {
        let policy = Self {
            scorer,
            slate_size,
            logit_scale,
            logit_offset,
        };
        policy.validate()?;
        Ok(policy)
    }

    fn validate(&self) -> Result<()> {
        self.scorer.validate()?;
        if self.slate_size == 0 {
            return Err(Error::NonPositiveSlateSize);
        }
        if !(self.logit_scale.is_finite() && self.logit_offset.is_finite()) {
            return Err(Error::NonFinite("logit transform"));
        }
        Ok(())
    }

    pub fn logits(&self, x: &Context) -> Result<Vec<f64>> {
        Ok(self
            .scorer
            .scores(x)?
            .into_iter()
            .map(|s| self.logit_scale * s + self.logit_offset)
            .collect())
    }

    pub fn with_slate_size(&self, slate_size: usize) -> Result<Self> {
        Self::new(
            self.scorer.clone(),
            slate_size,
            self.logit_scale,
            self.logit_offset,
        )
    }
}

/// Top-down sampling without replacement from softmax scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlackettLucePolicy {
    #[serde(flatten)]
    pub scorer: LinearScorer,
    pub slate_size: usize,
}

impl PlackettLucePolicy {
    pub fn new(scorer: LinearScorer, slate_size: usize) -> Result<Self> {
        let policy = Self { scorer, slate_size };
        policy.validate()?;
        Ok(policy)
    }

    fn validate(&self) -> Result<()> {
        self.scorer.validate()?;
        if self.slate_size == 0 {
            return Err(Error::NonPositiveSlateSize);
        }
        if self.slate_size > self.scorer.n_actions() {
            return Err(Error::InvalidConfig(format!(
                "a ranking of {} slots needs at least as many actions, got {}",
                self.slate_size,
                self.scorer.n_actions()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformPolicy {
    pub n_actions: usize,
    pub slate_size: usize,
}

impl UniformPolicy {
    pub fn new(n_actions: usize, slate_size: usize) -> Result<Self> {
        if slate_size == 0 {
            return Err(Error::NonPositiveSlateSize);
        }
        if n_actions == 0 {
            return Err(Error::InvalidConfig("uniform policy needs actions".into()));
        }
        Ok(Self {
            n_actions,
            slate_size,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Policy {
    FactorizableSoftmax(FactorizableSoftmaxPolicy),
    PlackettLuce(PlackettLucePolicy),
    Uniform(UniformPolicy),
}

impl From<FactorizableSoftmaxPolicy> for Policy {
    fn from(p: FactorizableSoftmaxPolicy) -> Self {
        Policy::FactorizableSoftmax(p)
    }
}

impl From<PlackettLucePolicy> for Policy {
    fn from(p: PlackettLucePolicy) -> Self {
        Policy::PlackettLuce(p)
    }
}

impl From<UniformPolicy> for Policy {
    fn from(p: UniformPolicy) -> Self {
        Policy::Uniform(p)
    }
}

/// A marginal slot distribution; `mc_std_error` is set when it was
/// estimated by sampling instead of enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotMarginal {
    pub probs: Vec<f64>,
    pub mc_std_error: Option<f64>,
}

/// A policy evaluated at one context: cheap conditional queries for any
/// prefix without recomputing scores.
#[derive(Debug, Clone)]
pub struct ConditionalPmf {
    slate_size: usize,
    kind: ConditionalKind,
}

#[derive(Debug, Clone)]
enum ConditionalKind {
    Fixed(Vec<f64>),
    /// Unnormalized weights `exp(logit - max)`.
    PlackettLuce(Vec<f64>),
}

impl ConditionalPmf {
    pub fn n_actions(&self) -> usize {
        match &self.kind {
            ConditionalKind::Fixed(p) | ConditionalKind::PlackettLuce(p) => p.len(),
        }
    }

    pub fn slate_size(&self) -> usize {
        self.slate_size
    }

    pub fn is_factorizable(&self) -> bool {
        matches!(self.kind, ConditionalKind::Fixed(_))
    }

    /// `π(action | x, prefix)`. The prefix is assumed valid.
    pub fn prob(&self, prefix: &[usize], action: usize) -> f64 {
        match &self.kind {
            ConditionalKind::Fixed(p) => p[action],
            ConditionalKind::PlackettLuce(w) => {
                if prefix.contains(&action) {
                    return 0.0;
                }
                let remaining: f64 = (0..w.len())
                    .filter(|b| !prefix.contains(b))
                    .map(|b| w[b])
                    .sum();
                w[action] / remaining
            }
        }
    }

    /// Writes `π(· | x, prefix)` into `out`.
    pub fn fill(&self, prefix: &[usize], out: &mut Vec<f64>) {
        out.clear();
        match &self.kind {
            ConditionalKind::Fixed(p) => out.extend_from_slice(p),
            ConditionalKind::PlackettLuce(w) => {
                out.extend(
                    w.iter()
                        .enumerate()
                        .map(|(a, &v)| if prefix.contains(&a) { 0.0 } else { v }),
                );
                let total: f64 = out.iter().sum();
                out.iter_mut().for_each(|v| *v /= total);
            }
        }
    }

    pub fn pmf(&self, prefix: &[usize]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_actions());
        self.fill(prefix, &mut out);
        out
    }

    /// `π(a_{1:l} | x) = Π_{l'} π(a_{l'} | x, a_{1:l'-1})`.
    pub fn prefix_prob(&self, slate_prefix: &[usize]) -> f64 {
        (0..slate_prefix.len())
            .map(|l| self.prob(&slate_prefix[..l], slate_prefix[l]))
            .product()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        let mut slate = Vec::with_capacity(self.slate_size);
        let mut buf = Vec::with_capacity(self.n_actions());
        for _ in 0..self.slate_size {
            self.fill(&slate, &mut buf);
            slate.push(rng::sample_categorical(rng, &buf));
        }
        slate
    }
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut out = unnormalized_softmax(logits);
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= total);
    out
}

fn unnormalized_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    logits.iter().map(|&z| (z - max).exp()).collect()
}

impl Policy {
    pub fn n_actions(&self) -> usize {
        match self {
            Policy::FactorizableSoftmax(p) => p.scorer.n_actions(),
            Policy::PlackettLuce(p) => p.scorer.n_actions(),
            Policy::Uniform(p) => p.n_actions,
        }
    }

    pub fn slate_size(&self) -> usize {
        match self {
            Policy::FactorizableSoftmax(p) => p.slate_size,
            Policy::PlackettLuce(p) => p.slate_size,
            Policy::Uniform(p) => p.slate_size,
        }
    }

    /// Context dimension the policy expects; `None` when it ignores the context.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Policy::FactorizableSoftmax(p) => Some(p.scorer.dim()),
            Policy::PlackettLuce(p) => Some(p.scorer.dim()),
            Policy::Uniform(_) => None,
        }
    }

    pub fn is_factorizable(&self) -> bool {
        !matches!(self, Policy::PlackettLuce(_))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Policy::FactorizableSoftmax(p) => p.validate(),
            Policy::PlackettLuce(p) => p.validate(),
            Policy::Uniform(p) => UniformPolicy::new(p.n_actions, p.slate_size).map(|_| ()),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let policy: Policy = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        policy.validate()?;
        Ok(policy)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("policy serialization cannot fail")
    }

    /// Evaluates the policy at `x` for repeated conditional queries.
    pub fn at(&self, x: &Context) -> Result<ConditionalPmf> {
        let slate_size = self.slate_size();
        let kind = match self {
            Policy::FactorizableSoftmax(p) => ConditionalKind::Fixed(softmax(&p.logits(x)?)),
            Policy::PlackettLuce(p) => {
                ConditionalKind::PlackettLuce(unnormalized_softmax(&p.scorer.scores(x)?))
            }
            Policy::Uniform(p) => {
                ConditionalKind::Fixed(vec![1.0 / p.n_actions as f64; p.n_actions])
            }
        };
        Ok(ConditionalPmf { slate_size, kind })
    }

    fn check_actions(&self, actions: &[usize]) -> Result<()> {
        let n_actions = self.n_actions();
        match actions.iter().find(|&&a| a >= n_actions) {
            Some(&action) => Err(Error::ActionOutOfRange { action, n_actions }),
            None => Ok(()),
        }
    }

    /// `π(· | x, a_{1:l-1})` for a prefix shorter than the slate.
    pub fn conditional_pmf(&self, x: &Context, prefix: &[usize]) -> Result<Vec<f64>> {
        if prefix.len() >= self.slate_size() {
            return Err(Error::PrefixTooLong {
                prefix: prefix.len(),
                slate_size: self.slate_size(),
            });
        }
        self.check_actions(prefix)?;
        Ok(self.at(x)?.pmf(prefix))
    }

    /// `π(a | x)`. Plackett-Luce returns 0 for slates with duplicates.
    pub fn slate_pmf(&self, x: &Context, slate: &SlateAction) -> Result<f64> {
        if slate.len() != self.slate_size() {
            return Err(Error::LengthMismatch {
                what: "slate length",
                expected: self.slate_size(),
                found: slate.len(),
            });
        }
        self.check_actions(slate.items())?;
        Ok(self.at(x)?.prefix_prob(slate.items()))
    }

    /// `π(a_l = · | x)` marginalized over the other slots.
    ///
    /// Plackett-Luce marginals are enumerated when `|A|^L` is at most
    /// [`MARGINAL_ENUMERATION_LIMIT`] and sampled otherwise.
    pub fn marginal_slot_pmf(&self, x: &Context, slot: usize) -> Result<SlotMarginal> {
        if slot >= self.slate_size() {
            return Err(Error::SlotOutOfRange {
                slot,
                slate_size: self.slate_size(),
            });
        }
        let pmf = self.at(x)?;
        if pmf.is_factorizable() {
            return Ok(SlotMarginal {
                probs: pmf.pmf(&[]),
                mc_std_error: None,
            });
        }
        let n = self.n_actions();
        let space = (n as u128).saturating_pow(self.slate_size() as u32);
        if space <= MARGINAL_ENUMERATION_LIMIT {
            let mut probs = vec![0.0; n];
            let mut prefix = Vec::with_capacity(slot + 1);
            enumerate_marginal(&pmf, slot, 1.0, &mut prefix, &mut probs);
            Ok(SlotMarginal {
                probs,
                mc_std_error: None,
            })
        } else {
            let mut rng = rng::stream(MARGINAL_MC_SEED, slot as u64);
            let mut counts = vec![0usize; n];
            for _ in 0..MARGINAL_MC_SAMPLES {
                counts[pmf.sample(&mut rng)[slot]] += 1;
            }
            let m = MARGINAL_MC_SAMPLES as f64;
            let probs: Vec<f64> = counts.iter().map(|&c| c as f64 / m).collect();
            let se = probs
                .iter()
                .map(|p| (p * (1.0 - p) / m).sqrt())
                .fold(0.0, f64::max);
            Ok(SlotMarginal {
                probs,
                mc_std_error: Some(se),
            })
        }
    }

    /// `L × |A|` matrix of per-slot marginal probabilities.
    pub fn slot_pmf(&self, x: &Context) -> Result<Vec<Vec<f64>>> {
        if self.is_factorizable() {
            let row = self.at(x)?.pmf(&[]);
            return Ok(vec![row; self.slate_size()]);
        }
        (0..self.slate_size())
            .map(|l| self.marginal_slot_pmf(x, l).map(|m| m.probs))
            .collect()
    }

    pub fn sample_slate<R: Rng + ?Sized>(&self, x: &Context, rng: &mut R) -> Result<SlateAction> {
        Ok(SlateAction::new(self.at(x)?.sample(rng), self.n_actions())
            .expect("sampled actions are in range"))
    }
}

fn enumerate_marginal(
    pmf: &ConditionalPmf,
    slot: usize,
    mass: f64,
    prefix: &mut Vec<usize>,
    out: &mut [f64],
) {
    let depth = prefix.len();
    for a in 0..out.len() {
        let p = pmf.prob(prefix, a);
        if p == 0.0 {
            continue;
        }
        if depth == slot {
            out[a] += mass * p;
        } else {
            prefix.push(a);
            enumerate_marginal(pmf, slot, mass * p, prefix, out);
            prefix.pop();
        }
    }
}

/// Behavior policy with `θ_a` and `b_a` drawn i.i.d. from `U[0, 1)`.
pub fn make_behavior_policy<R: Rng + ?Sized>(
    dim: usize,
    n_actions: usize,
    slate_size: usize,
    rng: &mut R,
) -> Result<FactorizableSoftmaxPolicy> {
    if dim == 0 || n_actions == 0 {
        return Err(Error::InvalidConfig(
            "behavior policy needs positive dimension and action count".into(),
        ));
    }
    let theta = (0..n_actions)
        .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
        .collect();
    let bias = (0..n_actions).map(|_| rng.random::<f64>()).collect();
    FactorizableSoftmaxPolicy::new(LinearScorer::new(theta, bias)?, slate_size, 1.0, 0.0)
}

/// Evaluation policy with logits `λ · f_b(x, a) + (1 - |λ|)`, reusing the
/// behavior scorer `f_b`.
///
/// The additive `1 - |λ|` is kept as written even though a constant shift
/// leaves a softmax unchanged; `λ = 0` gives the uniform policy and `λ → 1`
/// recovers the behavior policy.
pub fn make_evaluation_policy(
    behavior: &FactorizableSoftmaxPolicy,
    lambda: f64,
) -> Result<FactorizableSoftmaxPolicy> {
    if !(-1.0..1.0).contains(&lambda) {
        return Err(Error::LambdaOutOfRange(lambda));
    }
    FactorizableSoftmaxPolicy::new(
        behavior.scorer.clone(),
        behavior.slate_size,
        lambda,
        1.0 - lambda.abs(),
    )
}

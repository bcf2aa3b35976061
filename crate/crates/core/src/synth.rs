//! Synthetic slate environment with known ground truth.
//!
//! The slot-level click probability is
//!
//! ```text
//! q_l(x, a) = σ( q̃(x, a_l) + F(x, a) ),   q̃(x, a) = θ_a^T x + b_a
//! ```
//!
//! where `F` sums pairwise interactions `G(k, l)` over all other slots
//! (`standard`), over the slots above `l` (`cascade`), or is zero
//! (`independence`). `G` is either a symmetric action-pair matrix
//! (`additive`) or `-q̃(x, a_k) / (|k - l| + 1)` (`decay`).

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{ConditionalPmf, Policy};
use crate::rng;
use crate::types::{
    make_alpha_weights, AlphaKind, AlphaWeights, Context, LoggedDataset, LoggedRecord,
    RewardVector, SlateAction,
};

/// Largest slate space enumerated for exact policy values.
pub const TRUTH_ENUMERATION_LIMIT: u128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardStructure {
    Standard,
    Cascade,
    Independence,
}

impl RewardStructure {
    pub const ALL: [RewardStructure; 3] = [
        RewardStructure::Standard,
        RewardStructure::Cascade,
        RewardStructure::Independence,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RewardStructure::Standard => "standard",
            RewardStructure::Cascade => "cascade",
            RewardStructure::Independence => "independence",
        }
    }
}

impl fmt::Display for RewardStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RewardStructure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(RewardStructure::Standard),
            "cascade" => Ok(RewardStructure::Cascade),
            "independence" => Ok(RewardStructure::Independence),
            other => Err(Error::InvalidConfig(format!("unknown reward structure {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionKind {
    Additive,
    Decay,
}

impl InteractionKind {
    pub const ALL: [InteractionKind; 2] = [InteractionKind::Additive, InteractionKind::Decay];

    pub fn as_str(self) -> &'static str {
        match self {
            InteractionKind::Additive => "additive",
            InteractionKind::Decay => "decay",
        }
    }
}

impl fmt::Display for InteractionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InteractionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "additive" => Ok(InteractionKind::Additive),
            "decay" => Ok(InteractionKind::Decay),
            other => Err(Error::InvalidConfig(format!("unknown interaction {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub dim: usize,
    pub n_actions: usize,
    pub slate_size: usize,
    pub alpha: AlphaWeights,
    pub reward_structure: RewardStructure,
    pub interaction_kind: InteractionKind,
    pub interaction_scale: f64,
}

impl EnvConfig {
    /// `d = 5`, `|A| = 5`, unit slot weights, interaction scale 1.
    pub fn standard_setup(
        slate_size: usize,
        reward_structure: RewardStructure,
        interaction_kind: InteractionKind,
    ) -> Result<Self> {
        Ok(Self {
            dim: 5,
            n_actions: 5,
            slate_size,
            alpha: make_alpha_weights(&AlphaKind::Uniform, slate_size)?,
            reward_structure,
            interaction_kind,
            interaction_scale: 1.0,
        })
    }
}

/// How the context expectation of a policy value is evaluated per context.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TruthMode {
    /// Enumerate every slate in the policy's support.
    Exact,
    /// Average over `slates` sampled slates per context.
    MonteCarlo { slates: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticEnv {
    config: EnvConfig,
    base_theta: Vec<Vec<f64>>,
    base_bias: Vec<f64>,
    interaction_matrix: Vec<Vec<f64>>,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl SyntheticEnv {
    pub fn new(
        config: EnvConfig,
        base_theta: Vec<Vec<f64>>,
        base_bias: Vec<f64>,
        interaction_matrix: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n = config.n_actions;
        if config.dim == 0 || n == 0 {
            return Err(Error::InvalidConfig(
                "environment needs positive dimension and action count".into(),
            ));
        }
        if config.slate_size == 0 {
            return Err(Error::NonPositiveSlateSize);
        }
        if config.alpha.len() != config.slate_size {
            return Err(Error::LengthMismatch {
                what: "slot weights vs slate size",
                expected: config.slate_size,
                found: config.alpha.len(),
            });
        }
        if !config.interaction_scale.is_finite() {
            return Err(Error::NonFinite("interaction scale"));
        }
        if base_theta.len() != n || base_bias.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "base reward parameters must have {n} rows"
            )));
        }
        if base_theta.iter().any(|row| row.len() != config.dim) {
            return Err(Error::ShapeMismatch(format!(
                "base reward rows must have dimension {}",
                config.dim
            )));
        }
        if interaction_matrix.len() != n || interaction_matrix.iter().any(|row| row.len() != n) {
            return Err(Error::ShapeMismatch(format!(
                "interaction matrix must be {n}x{n}"
            )));
        }
        for i in 0..n {
            for j in 0..i {
                if (interaction_matrix[i][j] - interaction_matrix[j][i]).abs() > 1e-12 {
                    return Err(Error::InvalidConfig(format!(
                        "interaction matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let finite = base_theta
            .iter()
            .flatten()
            .chain(&base_bias)
            .chain(interaction_matrix.iter().flatten())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite("environment parameters"));
        }
        Ok(Self {
            config,
            base_theta,
            base_bias,
            interaction_matrix,
        })
    }

    /// Draws `θ_a`, `b_a` from `N(0, 1)` and the interaction matrix as the
    /// symmetric part of a `U[-1, 1]` matrix.
    pub fn sample<R: Rng + ?Sized>(config: EnvConfig, rng: &mut R) -> Result<Self> {
        let n = config.n_actions;
        let theta = (0..n)
            .map(|_| (0..config.dim).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        let bias = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let raw: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect())
            .collect();
        let w = (0..n)
            .map(|i| (0..n).map(|j| 0.5 * (raw[i][j] + raw[j][i])).collect())
            .collect();
        Self::new(config, theta, bias, w)
    }

    /// Same reward parameters with a different slate size and weights.
    pub fn with_slate_size(&self, slate_size: usize, alpha: AlphaWeights) -> Result<Self> {
        let config = EnvConfig {
            slate_size,
            alpha,
            ..self.config.clone()
        };
        Self::new(
            config,
            self.base_theta.clone(),
            self.base_bias.clone(),
            self.interaction_matrix.clone(),
        )
    }

    pub fn with_structure(
        &self,
        reward_structure: RewardStructure,
        interaction_kind: InteractionKind,
    ) -> Self {
        let mut env = self.clone();
        env.config.reward_structure = reward_structure;
        env.config.interaction_kind = interaction_kind;
        env
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn n_actions(&self) -> usize {
        self.config.n_actions
    }

    pub fn slate_size(&self) -> usize {
        self.config.slate_size
    }

    pub fn alpha(&self) -> &AlphaWeights {
        &self.config.alpha
    }

    pub fn reward_structure(&self) -> RewardStructure {
        self.config.reward_structure
    }

    pub fn interaction_kind(&self) -> InteractionKind {
        self.config.interaction_kind
    }

    pub fn base_theta(&self) -> &[Vec<f64>] {
        &self.base_theta
    }

    pub fn base_bias(&self) -> &[f64] {
        &self.base_bias
    }

    pub fn interaction_matrix(&self) -> &[Vec<f64>] {
        &self.interaction_matrix
    }

    fn check_context(&self, x: &Context) -> Result<()> {
        if x.dim() != self.config.dim {
            return Err(Error::DimensionMismatch {
                expected: self.config.dim,
                found: x.dim(),
            });
        }
        Ok(())
    }

    fn check_slate(&self, slate: &SlateAction) -> Result<()> {
        if slate.len() != self.config.slate_size {
            return Err(Error::LengthMismatch {
                what: "slate length",
                expected: self.config.slate_size,
                found: slate.len(),
            });
        }
        let n_actions = self.config.n_actions;
        if let Some(&action) = slate.items().iter().find(|&&a| a >= n_actions) {
            return Err(Error::ActionOutOfRange { action, n_actions });
        }
        Ok(())
    }

    fn check_slot(&self, slot: usize) -> Result<()> {
        if slot >= self.config.slate_size {
            return Err(Error::SlotOutOfRange {
                slot,
                slate_size: self.config.slate_size,
            });
        }
        Ok(())
    }

    /// `q̃(x, a) = θ_a^T x + b_a`.
    pub fn base_reward(&self, x: &Context, action: usize) -> Result<f64> {
        self.check_context(x)?;
        if action >= self.config.n_actions {
            return Err(Error::ActionOutOfRange {
                action,
                n_actions: self.config.n_actions,
            });
        }
        Ok(x.dot(&self.base_theta[action]) + self.base_bias[action])
    }

    /// `q̃(x, a)` for every action.
    pub fn base_rewards(&self, x: &Context) -> Result<Vec<f64>> {
        self.check_context(x)?;
        Ok(self
            .base_theta
            .iter()
            .zip(&self.base_bias)
            .map(|(t, b)| x.dot(t) + b)
            .collect())
    }

    /// `F(x, a)` for `slot`, computed from precomputed base rewards.
    ///
    /// Under cascade and independence only `slate[..=slot]` is read, so a
    /// prefix may be passed.
    pub(crate) fn interaction_from_base(&self, base: &[f64], slate: &[usize], slot: usize) -> f64 {
        let target = slate[slot];
        let g = |k: usize| match self.config.interaction_kind {
            InteractionKind::Additive => self.interaction_matrix[slate[k]][target],
            InteractionKind::Decay => -base[slate[k]] / ((k.abs_diff(slot) + 1) as f64),
        };
        let sum: f64 = match self.config.reward_structure {
            RewardStructure::Independence => return 0.0,
            RewardStructure::Cascade => (0..slot).map(g).sum(),
            RewardStructure::Standard => (0..slate.len()).filter(|&k| k != slot).map(g).sum(),
        };
        self.config.interaction_scale * sum
    }

    pub(crate) fn slot_mean_from_base(&self, base: &[f64], slate: &[usize], slot: usize) -> f64 {
        sigmoid(base[slate[slot]] + self.interaction_from_base(base, slate, slot))
    }

    /// Interaction `F(x, a)` entering the click probability of `slot`.
    pub fn interaction_term(&self, x: &Context, slate: &SlateAction, slot: usize) -> Result<f64> {
        self.check_slate(slate)?;
        self.check_slot(slot)?;
        let base = self.base_rewards(x)?;
        Ok(self.interaction_from_base(&base, slate.items(), slot))
    }

    /// `q_l(x, a) = σ(q̃(x, a_l) + F(x, a))`.
    pub fn slot_mean_reward(&self, x: &Context, slate: &SlateAction, slot: usize) -> Result<f64> {
        self.check_slate(slate)?;
        self.check_slot(slot)?;
        let base = self.base_rewards(x)?;
        Ok(self.slot_mean_from_base(&base, slate.items(), slot))
    }

    pub fn slot_mean_rewards(&self, x: &Context, slate: &SlateAction) -> Result<Vec<f64>> {
        self.check_slate(slate)?;
        let base = self.base_rewards(x)?;
        Ok((0..slate.len())
            .map(|l| self.slot_mean_from_base(&base, slate.items(), l))
            .collect())
    }

    /// Independent `Bern(q_l(x, a))` draws for each slot.
    pub fn sample_rewards<R: Rng + ?Sized>(
        &self,
        x: &Context,
        slate: &SlateAction,
        rng: &mut R,
    ) -> Result<RewardVector> {
        let means = self.slot_mean_rewards(x, slate)?;
        Ok(bernoulli_rewards(&means, rng))
    }

    fn draw_context<R: Rng + ?Sized>(&self, rng: &mut R) -> Context {
        Context::new(
            (0..self.config.dim)
                .map(|_| rng.sample(StandardNormal))
                .collect(),
        )
        .expect("normal draws are finite")
    }

    /// `n` i.i.d. standard normal contexts.
    pub fn sample_contexts<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<Context>> {
        if n == 0 {
            return Err(Error::InvalidConfig("context sample must be non-empty".into()));
        }
        Ok((0..n).map(|_| self.draw_context(rng)).collect())
    }

    /// Logs `n` interactions of `policy`, recording per-slot behavior
    /// probabilities `π_b(a_l | x, a_{1:l-1})`.
    ///
    /// Each record draws from its own stream keyed by a seed taken from
    /// `rng` and the record index, so generation can run in parallel.
    pub fn generate_dataset<R: Rng + ?Sized>(
        &self,
        policy: &Policy,
        n: usize,
        rng: &mut R,
    ) -> Result<LoggedDataset> {
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        self.check_policy(policy)?;
        let base_seed: u64 = rng.random();
        let records = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut rng = rng::stream(base_seed, i as u64);
                let x = self.draw_context(&mut rng);
                let pmf = policy.at(&x)?;
                let slate = pmf.sample(&mut rng);
                let propensities = (0..slate.len())
                    .map(|l| pmf.prob(&slate[..l], slate[l]))
                    .collect();
                let base = self.base_rewards(&x)?;
                let means: Vec<f64> = (0..slate.len())
                    .map(|l| self.slot_mean_from_base(&base, &slate, l))
                    .collect();
                let rewards = bernoulli_rewards(&means, &mut rng);
                LoggedRecord::new(
                    x,
                    SlateAction::new(slate, self.config.n_actions)?,
                    rewards,
                    Some(propensities),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        LoggedDataset::new(
            records,
            self.config.slate_size,
            self.config.n_actions,
            self.config.alpha.clone(),
        )
    }

    pub(crate) fn check_policy(&self, policy: &Policy) -> Result<()> {
        if policy.slate_size() != self.config.slate_size {
            return Err(Error::ShapeMismatch(format!(
                "policy slate size {} does not match environment slate size {}",
                policy.slate_size(),
                self.config.slate_size
            )));
        }
        if policy.n_actions() != self.config.n_actions {
            return Err(Error::ShapeMismatch(format!(
                "policy has {} actions, environment has {}",
                policy.n_actions(),
                self.config.n_actions
            )));
        }
        if let Some(d) = policy.dim() {
            if d != self.config.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.config.dim,
                    found: d,
                });
            }
        }
        Ok(())
    }

    /// Number of slates in the policy's support.
    pub fn slate_space(&self, policy: &Policy) -> u128 {
        let n = self.config.n_actions as u128;
        let l = self.config.slate_size as u32;
        if policy.is_factorizable() {
            n.saturating_pow(l)
        } else {
            (0..l as u128).map(|k| n - k).product()
        }
    }

    /// `V(π) ≈ mean_x Σ_a π(a|x) Σ_l α_l q_l(x, a)` over the given contexts.
    pub fn true_policy_value(
        &self,
        policy: &Policy,
        contexts: &[Context],
        mode: TruthMode,
    ) -> Result<f64> {
        if contexts.is_empty() {
            return Err(Error::InvalidConfig("context sample must be non-empty".into()));
        }
        self.check_policy(policy)?;
        let per_context: Vec<f64> = match mode {
            TruthMode::Exact => {
                let size = self.slate_space(policy);
                if size > TRUTH_ENUMERATION_LIMIT {
                    return Err(Error::EnumerationTooLarge {
                        size,
                        limit: TRUTH_ENUMERATION_LIMIT,
                    });
                }
                contexts
                    .par_iter()
                    .map(|x| self.exact_context_value(policy, x))
                    .collect::<Result<_>>()?
            }
            TruthMode::MonteCarlo { slates, seed } => {
                if slates == 0 {
                    return Err(Error::InvalidConfig(
                        "Monte Carlo truth needs at least one slate per context".into(),
                    ));
                }
                contexts
                    .par_iter()
                    .enumerate()
                    .map(|(i, x)| {
                        let mut rng = rng::stream(seed, i as u64);
                        let pmf = policy.at(x)?;
                        let base = self.base_rewards(x)?;
                        let total: f64 = (0..slates)
                            .map(|_| self.slate_value_from_base(&base, &pmf.sample(&mut rng)))
                            .sum();
                        Ok(total / slates as f64)
                    })
                    .collect::<Result<_>>()?
            }
        };
        Ok(per_context.iter().sum::<f64>() / per_context.len() as f64)
    }

    fn slate_value_from_base(&self, base: &[f64], slate: &[usize]) -> f64 {
        let alpha = self.config.alpha.values();
        (0..slate.len())
            .map(|l| alpha[l] * self.slot_mean_from_base(base, slate, l))
            .sum()
    }

    /// Exact `Σ_a π(a|x) Σ_l α_l q_l(x, a)` for one context.
    ///
    /// Under cascade and independence `q_l` depends only on `a_{1:l}`, so
    /// the slot-`l` term is accumulated once per prefix instead of once per
    /// full slate.
    pub(crate) fn exact_context_value(&self, policy: &Policy, x: &Context) -> Result<f64> {
        let pmf = policy.at(x)?;
        let base = self.base_rewards(x)?;
        if pmf.is_factorizable() {
            return Ok(self.factorized_context_value(&pmf.pmf(&[]), &base));
        }
        Ok(self.enumerated_context_value(&pmf, &base))
    }

    /// Exact value when every slot is an independent draw from `p`.
    ///
    /// Slots that enter `F` with the same coefficient are exchangeable, so
    /// each such group is summed over multisets of actions with multinomial
    /// weights rather than over ordered tuples.
    fn factorized_context_value(&self, p: &[f64], base: &[f64]) -> f64 {
        let cfg = &self.config;
        let alpha = cfg.alpha.values();
        let n = cfg.n_actions;
        let scale = cfg.interaction_scale;
        let mut total = 0.0;
        for slot in 0..cfg.slate_size {
            if alpha[slot] == 0.0 {
                continue;
            }
            let others: Vec<usize> = match cfg.reward_structure {
                RewardStructure::Independence => Vec::new(),
                RewardStructure::Cascade => (0..slot).collect(),
                RewardStructure::Standard => (0..cfg.slate_size).filter(|&k| k != slot).collect(),
            };
            let mut mean = 0.0;
            match cfg.interaction_kind {
                InteractionKind::Additive => {
                    for_each_multiset(p, others.len(), &mut |counts, prob| {
                        for (a, &pa) in p.iter().enumerate() {
                            if pa == 0.0 {
                                continue;
                            }
                            let f: f64 = (0..n)
                                .map(|b| counts[b] as f64 * self.interaction_matrix[b][a])
                                .sum();
                            mean += prob * pa * sigmoid(base[a] + scale * f);
                        }
                    });
                }
                InteractionKind::Decay => {
                    // group positions by distance, then convolve the groups
                    let mut groups: Vec<(usize, usize)> = Vec::new();
                    for &k in &others {
                        let d = k.abs_diff(slot);
                        match groups.iter_mut().find(|(gd, _)| *gd == d) {
                            Some(g) => g.1 += 1,
                            None => groups.push((d, 1)),
                        }
                    }
                    let mut dist = vec![(0.0, 1.0)];
                    for (d, size) in groups {
                        let coef = -1.0 / (d + 1) as f64;
                        let mut terms = Vec::new();
                        for_each_multiset(p, size, &mut |counts, prob| {
                            let v: f64 = (0..n).map(|b| counts[b] as f64 * base[b]).sum();
                            terms.push((coef * v, prob));
                        });
                        dist = dist
                            .iter()
                            .flat_map(|&(s, q)| terms.iter().map(move |&(v, r)| (s + v, q * r)))
                            .collect();
                    }
                    for (a, &pa) in p.iter().enumerate() {
                        if pa == 0.0 {
                            continue;
                        }
                        let inner: f64 = dist
                            .iter()
                            .map(|&(s, q)| q * sigmoid(base[a] + scale * s))
                            .sum();
                        mean += pa * inner;
                    }
                }
            }
            total += alpha[slot] * mean;
        }
        total
    }

    fn enumerated_context_value(&self, pmf: &ConditionalPmf, base: &[f64]) -> f64 {
        let alpha = self.config.alpha.values();
        let last = self.config.slate_size - 1;
        let mut total = 0.0;
        let mut prefix = Vec::with_capacity(self.config.slate_size);
        match self.config.reward_structure {
            RewardStructure::Standard => {
                walk_prefixes(pmf, &mut prefix, 1.0, &mut |slate, mass| {
                    if slate.len() == last + 1 {
                        total += mass * self.slate_value_from_base(base, slate);
                    }
                });
            }
            RewardStructure::Cascade | RewardStructure::Independence => {
                walk_prefixes(pmf, &mut prefix, 1.0, &mut |slate, mass| {
                    let l = slate.len() - 1;
                    total += mass * alpha[l] * self.slot_mean_from_base(base, slate, l);
                });
            }
        }
        total
    }
}

/// Calls `visit(counts, prob)` for every multiset of `size` actions with
/// positive probability, where `prob` is its multinomial probability under
/// i.i.d. draws from `p`.
fn for_each_multiset(p: &[f64], size: usize, visit: &mut dyn FnMut(&[usize], f64)) {
    fn rec(
        p: &[f64],
        action: usize,
        left: usize,
        counts: &mut Vec<usize>,
        prob: f64,
        visit: &mut dyn FnMut(&[usize], f64),
    ) {
        if action + 1 == p.len() {
            let mass = prob * p[action].powi(left as i32) / factorial(left);
            if mass > 0.0 {
                counts[action] = left;
                visit(counts, mass * factorial(counts.iter().sum()));
                counts[action] = 0;
            }
            return;
        }
        for c in 0..=left {
            let mass = prob * p[action].powi(c as i32) / factorial(c);
            if mass == 0.0 && c > 0 {
                break;
            }
            counts[action] = c;
            rec(p, action + 1, left - c, counts, mass, visit);
        }
        counts[action] = 0;
    }
    let mut counts = vec![0; p.len()];
    rec(p, 0, size, &mut counts, 1.0, visit);
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

fn bernoulli_rewards<R: Rng + ?Sized>(means: &[f64], rng: &mut R) -> RewardVector {
    RewardVector::new(
        means
            .iter()
            .map(|&q| if rng.random::<f64>() < q { 1.0 } else { 0.0 })
            .collect(),
    )
    .expect("binary rewards are finite")
}

/// Visits every non-empty prefix with positive probability, depth first in
/// lexicographic order, passing the prefix and its probability.
pub(crate) fn walk_prefixes(
    pmf: &ConditionalPmf,
    prefix: &mut Vec<usize>,
    mass: f64,
    visit: &mut dyn FnMut(&[usize], f64),
) {
    if prefix.len() == pmf.slate_size() {
        return;
    }
    for a in 0..pmf.n_actions() {
        let p = pmf.prob(prefix, a);
        if p == 0.0 {
            continue;
        }
        prefix.push(a);
        let m = mass * p;
        visit(prefix, m);
        walk_prefixes(pmf, prefix, m, visit);
        prefix.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{make_behavior_policy, PlackettLucePolicy, UniformPolicy, LinearScorer};

    fn ctx(v: &[f64]) -> Context {
        Context::new(v.to_vec()).unwrap()
    }

    fn env_with(
        n_actions: usize,
        slate_size: usize,
        structure: RewardStructure,
        kind: InteractionKind,
        seed: u64,
    ) -> SyntheticEnv {
        let config = EnvConfig {
            dim: 3,
            n_actions,
            slate_size,
            alpha: make_alpha_weights(&AlphaKind::Uniform, slate_size).unwrap(),
            reward_structure: structure,
            interaction_kind: kind,
            interaction_scale: 1.0,
        };
        SyntheticEnv::sample(config, &mut rng::seeded(seed)).unwrap()
    }

    fn zero_env(
        slate_size: usize,
        structure: RewardStructure,
        kind: InteractionKind,
    ) -> SyntheticEnv {
        let config = EnvConfig {
            dim: 5,
            n_actions: 2,
            slate_size,
            alpha: make_alpha_weights(&AlphaKind::Uniform, slate_size).unwrap(),
            reward_structure: structure,
            interaction_kind: kind,
            interaction_scale: 1.0,
        };
        SyntheticEnv::new(
            config,
            vec![vec![0.0; 5]; 2],
            vec![0.0; 2],
            vec![vec![0.0; 2]; 2],
        )
        .unwrap()
    }

    fn all_slates(n: usize, l: usize) -> Vec<Vec<usize>> {
        let mut out = vec![vec![]];
        for _ in 0..l {
            out = out
                .into_iter()
                .flat_map(|p| {
                    (0..n).map(move |a| {
                        let mut q = p.clone();
                        q.push(a);
                        q
                    })
                })
                .collect();
        }
        out
    }

    #[test]
    fn base_reward_examples() {
        let env = zero_env(2, RewardStructure::Independence, InteractionKind::Additive);
        let x = ctx(&[2.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(env.base_reward(&x, 1).unwrap(), 0.0);

        let mut theta = vec![vec![0.0; 5]; 2];
        theta[0][0] = 1.0;
        let config = env.config().clone();
        let env = SyntheticEnv::new(config, theta, vec![1.0, 0.0], vec![vec![0.0; 2]; 2]).unwrap();
        assert_eq!(env.base_reward(&x, 0).unwrap(), 3.0);
        assert!(matches!(
            env.base_reward(&x, 2),
            Err(Error::ActionOutOfRange { .. })
        ));
    }

    #[test]
    fn sampled_theta_is_standard_normal() {
        let config = EnvConfig {
            dim: 2_000,
            n_actions: 50,
            slate_size: 1,
            alpha: make_alpha_weights(&AlphaKind::Uniform, 1).unwrap(),
            reward_structure: RewardStructure::Independence,
            interaction_kind: InteractionKind::Additive,
            interaction_scale: 1.0,
        };
        let env = SyntheticEnv::sample(config, &mut rng::seeded(17)).unwrap();
        let draws: Vec<f64> = env.base_theta().iter().flatten().copied().collect();
        let m = draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / m;
        let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
        assert!(mean.abs() < 3.0 / m.sqrt());
        assert!((var - 1.0).abs() < 3.0 * (2.0 / m).sqrt());

        let w = env.interaction_matrix();
        for i in 0..50 {
            for j in 0..50 {
                assert_eq!(w[i][j], w[j][i]);
                assert!(w[i][j].abs() <= 1.0);
            }
        }
    }

    #[test]
    fn interaction_examples() {
        let x = ctx(&[0.1, -0.5, 0.9]);
        let env = env_with(3, 4, RewardStructure::Independence, InteractionKind::Additive, 1);
        let s = SlateAction::new(vec![0, 1, 2, 1], 3).unwrap();
        for l in 0..4 {
            assert_eq!(env.interaction_term(&x, &s, l).unwrap(), 0.0);
        }

        // decay: slot 4 (1-based) under cascade, the contribution of slot 2 is -q̃_2 / 3
        let env = env_with(3, 4, RewardStructure::Cascade, InteractionKind::Decay, 2);
        let base = env.base_rewards(&x).unwrap();
        let f = env.interaction_term(&x, &s, 3).unwrap();
        let expected = -base[0] / 4.0 - base[1] / 3.0 - base[2] / 2.0;
        assert!((f - expected).abs() < 1e-12);

        let env = env_with(3, 2, RewardStructure::Standard, InteractionKind::Additive, 3);
        let s = SlateAction::new(vec![2, 0], 3).unwrap();
        let w = env.interaction_matrix();
        assert_eq!(env.interaction_term(&x, &s, 0).unwrap(), w[0][2]);
        let swapped = SlateAction::new(vec![0, 2], 3).unwrap();
        assert_eq!(
            env.interaction_term(&x, &s, 0).unwrap(),
            env.interaction_term(&x, &swapped, 1).unwrap()
        );
    }

    #[test]
    fn slot_mean_examples() {
        let x = ctx(&[0.0; 5]);
        let env = zero_env(2, RewardStructure::Independence, InteractionKind::Additive);
        let s = SlateAction::new(vec![0, 1], 2).unwrap();
        assert_eq!(env.slot_mean_reward(&x, &s, 0).unwrap(), 0.5);

        // q̃ = 1 for every action; decay cascade, slot 2: σ(1 - 1/2).
        let config = EnvConfig {
            reward_structure: RewardStructure::Cascade,
            interaction_kind: InteractionKind::Decay,
            ..env.config().clone()
        };
        let env =
            SyntheticEnv::new(config, vec![vec![0.0; 5]; 2], vec![1.0; 2], vec![vec![0.0; 2]; 2])
                .unwrap();
        let q = env.slot_mean_reward(&x, &s, 1).unwrap();
        assert!((q - 0.622_459_331_201_854_6).abs() < 1e-12);
    }

    #[test]
    fn cascade_invariance_exhaustive() {
        let x = ctx(&[0.7, -1.2, 0.4]);
        for kind in InteractionKind::ALL {
            let env = env_with(3, 3, RewardStructure::Cascade, kind, 5);
            let slates = all_slates(3, 3);
            for a in &slates {
                for b in &slates {
                    let sa = SlateAction::new(a.clone(), 3).unwrap();
                    let sb = SlateAction::new(b.clone(), 3).unwrap();
                    for l in 0..3 {
                        if a[..=l] == b[..=l] {
                            assert_eq!(
                                env.slot_mean_reward(&x, &sa, l).unwrap(),
                                env.slot_mean_reward(&x, &sb, l).unwrap()
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn independence_invariance_exhaustive() {
        let x = ctx(&[0.7, -1.2, 0.4]);
        for kind in InteractionKind::ALL {
            let env = env_with(3, 3, RewardStructure::Independence, kind, 6);
            for a in all_slates(3, 3) {
                let s = SlateAction::new(a.clone(), 3).unwrap();
                for l in 0..3 {
                    let q = env.slot_mean_reward(&x, &s, l).unwrap();
                    let solo = sigmoid(env.base_reward(&x, a[l]).unwrap());
                    assert_eq!(q, solo);
                    assert!(q > 0.0 && q < 1.0);
                }
            }
        }
    }

    #[test]
    fn degenerate_rewards() {
        let x = ctx(&[0.0; 5]);
        let s = SlateAction::new(vec![0, 1], 2).unwrap();
        for (bias, expected) in [(1e3, 1.0), (-1e3, 0.0)] {
            let env = zero_env(2, RewardStructure::Independence, InteractionKind::Additive);
            let env = SyntheticEnv::new(
                env.config().clone(),
                vec![vec![0.0; 5]; 2],
                vec![bias; 2],
                vec![vec![0.0; 2]; 2],
            )
            .unwrap();
            let mut rng = rng::seeded(1);
            for _ in 0..100 {
                let r = env.sample_rewards(&x, &s, &mut rng).unwrap();
                assert!(r.values().iter().all(|&v| v == expected));
            }
        }
    }

    #[test]
    fn reward_frequencies_match_means() {
        let x = ctx(&[0.3, 0.1, -0.2]);
        let env = env_with(3, 2, RewardStructure::Standard, InteractionKind::Additive, 8);
        let s = SlateAction::new(vec![1, 2], 3).unwrap();
        let q = env.slot_mean_rewards(&x, &s).unwrap();
        let m = 100_000;
        let mut hits = [0.0; 2];
        let mut rng = rng::seeded(99);
        for _ in 0..m {
            let r = env.sample_rewards(&x, &s, &mut rng).unwrap();
            hits[0] += r.values()[0];
            hits[1] += r.values()[1];
        }
        for l in 0..2 {
            let sigma = (q[l] * (1.0 - q[l]) / m as f64).sqrt();
            assert!((hits[l] / m as f64 - q[l]).abs() < 3.0 * sigma);
        }
    }

    #[test]
    fn contexts_are_standard_normal() {
        let env = env_with(2, 1, RewardStructure::Independence, InteractionKind::Additive, 1);
        let a = env.sample_contexts(100_000, &mut rng::seeded(5)).unwrap();
        let b = env.sample_contexts(3, &mut rng::seeded(5)).unwrap();
        assert_eq!(&a[..3], &b[..]);
        let m = a.len() as f64;
        for j in 0..3 {
            let mean = a.iter().map(|x| x.values()[j]).sum::<f64>() / m;
            assert!(mean.abs() < 3.0 / m.sqrt());
        }
        assert!(env.sample_contexts(0, &mut rng::seeded(5)).is_err());
        assert_eq!(
            EnvConfig::standard_setup(3, RewardStructure::Cascade, InteractionKind::Decay)
                .unwrap()
                .dim,
            5
        );
    }

    #[test]
    fn dataset_generation() {
        let env = env_with(2, 2, RewardStructure::Cascade, InteractionKind::Additive, 4);
        let uniform: Policy = UniformPolicy::new(2, 2).unwrap().into();
        assert!(matches!(
            env.generate_dataset(&uniform, 0, &mut rng::seeded(1)),
            Err(Error::EmptyDataset)
        ));

        let m = 40_000;
        let data = env.generate_dataset(&uniform, m, &mut rng::seeded(1)).unwrap();
        let again = env.generate_dataset(&uniform, m, &mut rng::seeded(1)).unwrap();
        assert_eq!(data, again);
        let mut counts = [0usize; 4];
        for r in data.records() {
            counts[r.slate.items()[0] * 2 + r.slate.items()[1]] += 1;
            assert_eq!(r.propensities.as_deref(), Some(&[0.5, 0.5][..]));
        }
        let sigma = (0.25f64 * 0.75 / m as f64).sqrt();
        for c in counts {
            assert!((c as f64 / m as f64 - 0.25).abs() < 3.0 * sigma);
        }

        let behavior: Policy = make_behavior_policy(3, 2, 2, &mut rng::seeded(3))
            .unwrap()
            .into();
        let data = env.generate_dataset(&behavior, 500, &mut rng::seeded(2)).unwrap();
        for r in data.records() {
            for &p in r.propensities.as_ref().unwrap() {
                assert!(p > 0.0 && p < 1.0);
            }
        }
    }

    #[test]
    fn true_value_single_action() {
        let env = env_with(1, 3, RewardStructure::Standard, InteractionKind::Additive, 2);
        let policy: Policy = UniformPolicy::new(1, 3).unwrap().into();
        let x = ctx(&[0.5, 0.5, -1.0]);
        let s = SlateAction::new(vec![0, 0, 0], 1).unwrap();
        let expected: f64 = env.slot_mean_rewards(&x, &s).unwrap().iter().sum();
        let v = env
            .true_policy_value(&policy, &[x], TruthMode::Exact)
            .unwrap();
        assert!((v - expected).abs() < 1e-12);
    }

    #[test]
    fn true_value_independence_closed_form() {
        let env = env_with(2, 2, RewardStructure::Independence, InteractionKind::Decay, 21);
        let policy: Policy = UniformPolicy::new(2, 2).unwrap().into();
        let contexts = env.sample_contexts(5, &mut rng::seeded(1)).unwrap();
        let expected = contexts
            .iter()
            .map(|x| {
                (0..2)
                    .map(|_l| {
                        (sigmoid(env.base_reward(x, 0).unwrap())
                            + sigmoid(env.base_reward(x, 1).unwrap()))
                            / 2.0
                    })
                    .sum::<f64>()
            })
            .sum::<f64>()
            / 5.0;
        let v = env
            .true_policy_value(&policy, &contexts, TruthMode::Exact)
            .unwrap();
        assert!((v - expected).abs() < 1e-12);
    }

    #[test]
    fn exact_prefix_walk_matches_full_enumeration() {
        // Independent route: list every slate, multiply slot probabilities and
        // sum the slate values.
        let contexts: Vec<Context> = vec![ctx(&[0.3, -0.7, 1.1]), ctx(&[-1.0, 0.2, 0.0])];
        for structure in RewardStructure::ALL {
            for kind in InteractionKind::ALL {
                let env = env_with(3, 3, structure, kind, 12);
                let behavior = make_behavior_policy(3, 3, 3, &mut rng::seeded(13)).unwrap();
                let policy: Policy = behavior.into();
                let mut oracle = 0.0;
                for x in &contexts {
                    for a in all_slates(3, 3) {
                        let s = SlateAction::new(a, 3).unwrap();
                        let p = policy.slate_pmf(x, &s).unwrap();
                        let v: f64 = env.slot_mean_rewards(x, &s).unwrap().iter().sum();
                        oracle += p * v;
                    }
                }
                oracle /= contexts.len() as f64;
                let v = env
                    .true_policy_value(&policy, &contexts, TruthMode::Exact)
                    .unwrap();
                assert!((v - oracle).abs() < 1e-12, "{structure} {kind}");
            }
        }
    }

    #[test]
    fn multisets_cover_the_product_space() {
        let p = [0.5, 0.0, 0.3, 0.2];
        for size in 0..5 {
            let (mut mass, mut count) = (0.0, 0);
            for_each_multiset(&p, size, &mut |counts, prob| {
                assert_eq!(counts.iter().sum::<usize>(), size);
                assert_eq!(counts[1], 0);
                mass += prob;
                count += 1;
            });
            assert!((mass - 1.0).abs() < 1e-12);
            // multisets of `size` drawn from the three supported actions
            assert_eq!(count, (size + 1) * (size + 2) / 2);
        }
    }

    #[test]
    fn factorized_value_matches_enumeration() {
        let contexts: Vec<Context> = vec![ctx(&[0.3, -0.7, 1.1]), ctx(&[-1.0, 0.2, 0.0])];
        for l in [1, 2, 4] {
            for structure in RewardStructure::ALL {
                for kind in InteractionKind::ALL {
                    let mut env = env_with(4, 3, structure, kind, 21);
                    let alpha = make_alpha_weights(&AlphaKind::Dcg, l).unwrap();
                    env = env.with_slate_size(l, alpha).unwrap();
                    let policy: Policy = make_behavior_policy(3, 4, l, &mut rng::seeded(5))
                        .unwrap()
                        .into();
                    for x in &contexts {
                        let pmf = policy.at(x).unwrap();
                        let base = env.base_rewards(x).unwrap();
                        let fast = env.factorized_context_value(&pmf.pmf(&[]), &base);
                        let slow = env.enumerated_context_value(&pmf, &base);
                        assert!((fast - slow).abs() < 1e-12, "{l} {structure} {kind}");
                    }
                }
            }
        }
    }

    #[test]
    fn exact_and_monte_carlo_agree() {
        let env = env_with(3, 3, RewardStructure::Standard, InteractionKind::Additive, 30);
        let policy: Policy = make_behavior_policy(3, 3, 3, &mut rng::seeded(31))
            .unwrap()
            .into();
        let x = vec![ctx(&[0.2, 0.4, -0.3])];
        let exact = env.true_policy_value(&policy, &x, TruthMode::Exact).unwrap();

        // per-slate value spread, for the Monte Carlo standard error
        let pmf = policy.at(&x[0]).unwrap();
        let mut second = 0.0;
        for a in all_slates(3, 3) {
            let s = SlateAction::new(a.clone(), 3).unwrap();
            let v: f64 = env.slot_mean_rewards(&x[0], &s).unwrap().iter().sum();
            second += pmf.prefix_prob(&a) * v * v;
        }
        let m = 100_000;
        let se = ((second - exact * exact) / m as f64).sqrt();
        let mc = env
            .true_policy_value(&policy, &x, TruthMode::MonteCarlo { slates: m, seed: 4 })
            .unwrap();
        assert!((mc - exact).abs() < 3.0 * se, "{mc} vs {exact} (se {se})");
    }

    #[test]
    fn exact_value_for_plackett_luce() {
        let env = env_with(3, 2, RewardStructure::Standard, InteractionKind::Decay, 40);
        let scorer = LinearScorer::new(vec![vec![0.5, 0.0, -0.2]; 3], vec![0.0, 1.0, -1.0]).unwrap();
        let policy: Policy = PlackettLucePolicy::new(scorer, 2).unwrap().into();
        let x = ctx(&[1.0, 1.0, 1.0]);
        let mut oracle = 0.0;
        for a in all_slates(3, 2) {
            let s = SlateAction::new(a, 3).unwrap();
            let p = policy.slate_pmf(&x, &s).unwrap();
            oracle += p * env.slot_mean_rewards(&x, &s).unwrap().iter().sum::<f64>();
        }
        let v = env
            .true_policy_value(&policy, &[x], TruthMode::Exact)
            .unwrap();
        assert!((v - oracle).abs() < 1e-12);
    }

    #[test]
    fn exact_refuses_huge_spaces() {
        let config = EnvConfig {
            dim: 2,
            n_actions: 10,
            slate_size: 7,
            alpha: make_alpha_weights(&AlphaKind::Uniform, 7).unwrap(),
            reward_structure: RewardStructure::Standard,
            interaction_kind: InteractionKind::Additive,
            interaction_scale: 1.0,
        };
        let env = SyntheticEnv::sample(config, &mut rng::seeded(1)).unwrap();
        let policy: Policy = UniformPolicy::new(10, 7).unwrap().into();
        assert!(matches!(
            env.true_policy_value(&policy, &[ctx(&[0.0, 0.0])], TruthMode::Exact),
            Err(Error::EnumerationTooLarge { .. })
        ));
    }

    #[test]
    fn asymmetric_matrix_rejected() {
        let env = zero_env(2, RewardStructure::Standard, InteractionKind::Additive);
        let r = SyntheticEnv::new(
            env.config().clone(),
            vec![vec![0.0; 5]; 2],
            vec![0.0; 2],
            vec![vec![0.0, 1.0], vec![0.5, 0.0]],
        );
        assert!(r.is_err());
    }
}

//! Domain types shared by every module: contexts, slates, rewards, slot
//! weights and logged datasets.
//!
//! Slots are 0-based in code. Documentation that talks about "slot l" in
//! the 1-based sense says so explicitly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A context vector `x` of fixed dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Context(Vec<f64>);

impl Context {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("context"));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        self.0.iter().zip(other).map(|(a, b)| a * b).sum()
    }
}

/// An ordered list of action indices, one per slot.
///
/// Duplicates are allowed; factorizable policies produce them.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SlateAction(Vec<usize>);

impl SlateAction {
    pub fn new(items: Vec<usize>, n_actions: usize) -> Result<Self> {
        if let Some(&action) = items.iter().find(|&&a| a >= n_actions) {
            return Err(Error::ActionOutOfRange { action, n_actions });
        }
        Ok(Self(items))
    }

    pub fn items(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn has_duplicates(&self) -> bool {
        self.0
            .iter()
            .enumerate()
            .any(|(i, a)| self.0[..i].contains(a))
    }
}

/// Slot-level rewards `r_1, ..., r_L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RewardVector(Vec<f64>);

impl RewardVector {
    pub fn new(rewards: Vec<f64>) -> Result<Self> {
        if rewards.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("rewards"));
        }
        Ok(Self(rewards))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "values")]
pub enum AlphaKind {
    Uniform,
    Dcg,
    Custom(Vec<f64>),
}

/// Non-negative slot weights defining the slate reward `Σ α_l r_l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AlphaWeights(Vec<f64>);

impl AlphaWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::NonPositiveSlateSize);
        }
        for (slot, &value) in weights.iter().enumerate() {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::InvalidAlpha { slot, value });
            }
        }
        Ok(Self(weights))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// Builds slot weights of the requested kind.
///
/// DCG weights are `1 / log2(l + 1)` for 1-based slot `l`.
pub fn make_alpha_weights(kind: &AlphaKind, slate_size: usize) -> Result<AlphaWeights> {
    if slate_size == 0 {
        return Err(Error::NonPositiveSlateSize);
    }
    match kind {
        AlphaKind::Uniform => AlphaWeights::new(vec![1.0; slate_size]),
        AlphaKind::Dcg => AlphaWeights::new(
            (1..=slate_size)
                .map(|l| 1.0 / ((l + 1) as f64).log2())
                .collect(),
        ),
        AlphaKind::Custom(values) => {
            if values.len() != slate_size {
                return Err(Error::LengthMismatch {
                    what: "custom slot weights",
                    expected: slate_size,
                    found: values.len(),
                });
            }
            AlphaWeights::new(values.clone())
        }
    }
}

/// Slate-level reward `Σ_l α_l r_l`.
pub fn slate_reward(rewards: &RewardVector, alpha: &AlphaWeights) -> Result<f64> {
    if rewards.len() != alpha.len() {
        return Err(Error::LengthMismatch {
            what: "rewards vs slot weights",
            expected: alpha.len(),
            found: rewards.len(),
        });
    }
    Ok(weighted_sum(alpha.values(), rewards.values()))
}

pub(crate) fn weighted_sum(alpha: &[f64], rewards: &[f64]) -> f64 {
    alpha.iter().zip(rewards).map(|(a, r)| a * r).sum()
}

/// One logged interaction `(x, a, r)`, optionally with the per-slot
/// behavior probabilities recorded at logging time.
#[derive(Debug, Clone, PartialEq)]
pub struct LoggedRecord {
    pub context: Context,
    pub slate: SlateAction,
    pub rewards: RewardVector,
    pub propensities: Option<Vec<f64>>,
}

impl LoggedRecord {
    pub fn new(
        context: Context,
        slate: SlateAction,
        rewards: RewardVector,
        propensities: Option<Vec<f64>>,
    ) -> Result<Self> {
        if rewards.len() != slate.len() {
            return Err(Error::LengthMismatch {
                what: "rewards vs slate",
                expected: slate.len(),
                found: rewards.len(),
            });
        }
        if let Some(p) = &propensities {
            if p.len() != slate.len() {
                return Err(Error::LengthMismatch {
                    what: "propensities vs slate",
                    expected: slate.len(),
                    found: p.len(),
                });
            }
        }
        Ok(Self {
            context,
            slate,
            rewards,
            propensities,
        })
    }

    pub fn slate_reward(&self, alpha: &AlphaWeights) -> Result<f64> {
        slate_reward(&self.rewards, alpha)
    }
}

/// Logged bandit data `D` of `n >= 1` records sharing `L`, `d` and `|A|`.
#[derive(Debug, Clone, PartialEq)]
pub struct LoggedDataset {
    records: Vec<LoggedRecord>,
    slate_size: usize,
    n_actions: usize,
    dim: usize,
    alpha: AlphaWeights,
}

impl LoggedDataset {
    pub fn new(
        records: Vec<LoggedRecord>,
        slate_size: usize,
        n_actions: usize,
        alpha: AlphaWeights,
    ) -> Result<Self> {
        if slate_size == 0 {
            return Err(Error::NonPositiveSlateSize);
        }
        if alpha.len() != slate_size {
            return Err(Error::LengthMismatch {
                what: "slot weights vs slate size",
                expected: slate_size,
                found: alpha.len(),
            });
        }
        let first = records.first().ok_or(Error::EmptyDataset)?;
        let dim = first.context.dim();
        for (i, record) in records.iter().enumerate() {
            Self::check_record(record, i, slate_size, n_actions, dim)?;
        }
        Ok(Self {
            records,
            slate_size,
            n_actions,
            dim,
            alpha,
        })
    }

    fn check_record(
        record: &LoggedRecord,
        index: usize,
        slate_size: usize,
        n_actions: usize,
        dim: usize,
    ) -> Result<()> {
        if record.slate.len() != slate_size {
            return Err(Error::LengthMismatch {
                what: "slate length",
                expected: slate_size,
                found: record.slate.len(),
            });
        }
        if record.context.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: record.context.dim(),
            });
        }
        if let Some(&action) = record.slate.items().iter().find(|&&a| a >= n_actions) {
            return Err(Error::ActionOutOfRange { action, n_actions });
        }
        if let Some(p) = &record.propensities {
            for (slot, &value) in p.iter().enumerate() {
                if !(value > 0.0 && value <= 1.0) {
                    return Err(Error::InvalidPropensity {
                        record: index,
                        slot,
                        value,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn records(&self) -> &[LoggedRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn slate_size(&self) -> usize {
        self.slate_size
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn alpha(&self) -> &AlphaWeights {
        &self.alpha
    }

    pub fn has_propensities(&self) -> bool {
        self.records.iter().all(|r| r.propensities.is_some())
    }

    /// A dataset made of the given record indices, repeats allowed.
    pub fn resample(&self, indices: &[usize]) -> Result<Self> {
        let records = indices
            .iter()
            .map(|&i| {
                self.records.get(i).cloned().ok_or(Error::ShapeMismatch(format!(
                    "resample index {i} out of range for {} records",
                    self.records.len()
                )))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(records, self.slate_size, self.n_actions, self.alpha.clone())
    }
}

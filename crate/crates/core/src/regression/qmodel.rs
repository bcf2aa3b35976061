use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::encoder::FeatureEncoder;
use super::ridge::RidgeModel;
use super::tree::{RegressionTree, TreeConfig};
use crate::error::{Error, Result};
use crate::estimators::{check_shapes, record_weights, Baseline, BehaviorSource};
use crate::policy::Policy;
use crate::types::{Context, LoggedDataset};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LearnerConfig {
    Tree {
        max_depth: usize,
        min_samples_leaf: usize,
    },
    Ridge {
        penalty: f64,
    },
}

impl Default for LearnerConfig {
    fn default() -> Self {
        let t = TreeConfig::default();
        LearnerConfig::Tree {
            max_depth: t.max_depth,
            min_samples_leaf: t.min_samples_leaf,
        }
    }
}

impl FromStr for LearnerConfig {
    type Err = Error;

    /// `tree` (depth 3, min leaf 5) or `ridge` (penalty 1).
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tree" => Ok(LearnerConfig::default()),
            "ridge" => Ok(LearnerConfig::Ridge { penalty: 1.0 }),
            other => Err(Error::InvalidConfig(format!("unknown learner {other:?}"))),
        }
    }
}

impl LearnerConfig {
    pub fn fit(&self, x: &[Vec<f64>], y: &[f64], w: &[f64]) -> Result<FittedLearner> {
        match *self {
            LearnerConfig::Tree {
                max_depth,
                min_samples_leaf,
            } => RegressionTree::fit(
                x,
                y,
                w,
                TreeConfig {
                    max_depth,
                    min_samples_leaf,
                },
            )
            .map(FittedLearner::Tree),
            LearnerConfig::Ridge { penalty } => {
                RidgeModel::fit(x, y, w, penalty).map(FittedLearner::Ridge)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FittedLearner {
    Tree(RegressionTree),
    Ridge(RidgeModel),
    Constant(f64),
}

impl FittedLearner {
    pub fn predict(&self, features: &[f64]) -> f64 {
        match self {
            FittedLearner::Tree(t) => t.predict(features),
            FittedLearner::Ridge(r) => r.predict(features),
            FittedLearner::Constant(c) => *c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossFit {
    #[default]
    None,
    /// Record `i` belongs to fold `i mod k`.
    KFold(usize),
}

/// Fitted `Q̂_1, …, Q̂_L`.
///
/// With k-fold cross-fitting there is one chain of slot models per fold,
/// each trained on the other folds, and record `i` is scored by the chain
/// of fold `i mod k`.
#[derive(Debug, Clone, PartialEq)]
pub struct QModel {
    encoder: FeatureEncoder,
    slate_size: usize,
    chains: Vec<Vec<FittedLearner>>,
}

impl QModel {
    /// `Q̂ ≡ 0`.
    pub fn zeros(encoder: FeatureEncoder, slate_size: usize) -> Self {
        Self::constant(encoder, slate_size, 0.0)
    }

    pub fn constant(encoder: FeatureEncoder, slate_size: usize, value: f64) -> Self {
        Self {
            encoder,
            slate_size,
            chains: vec![vec![FittedLearner::Constant(value); slate_size]],
        }
    }

    pub fn encoder(&self) -> FeatureEncoder {
        self.encoder
    }

    pub fn n_folds(&self) -> usize {
        self.chains.len()
    }

    pub fn slot_model(&self, fold: usize, slot: usize) -> Result<&FittedLearner> {
        self.chains
            .get(fold)
            .and_then(|chain| chain.get(slot))
            .ok_or(Error::UntrainedSlot(slot))
    }

    fn predict_with(&self, chain: &[FittedLearner], x: &Context, prefix: &[usize]) -> Result<f64> {
        let l = prefix.len();
        if l == 0 || l > self.slate_size {
            return Err(Error::SlotOutOfRange {
                slot: l,
                slate_size: self.slate_size,
            });
        }
        let features = self.encoder.encode(x, prefix)?;
        Ok(chain[l - 1].predict(&features))
    }
}

impl Baseline for QModel {
    fn slate_size(&self) -> usize {
        self.slate_size
    }

    fn predict(&self, record: usize, x: &Context, prefix: &[usize]) -> Result<f64> {
        let chain = &self.chains[record % self.chains.len()];
        self.predict_with(chain, x, prefix)
    }
}

/// `Q̂_l(x, a_{1:l})` with `l = prefix.len()`, averaged over the fold
/// chains of a cross-fitted model.
pub fn predict_q(model: &QModel, x: &Context, prefix: &[usize]) -> Result<f64> {
    let mut total = 0.0;
    for chain in &model.chains {
        total += model.predict_with(chain, x, prefix)?;
    }
    Ok(total / model.chains.len() as f64)
}

/// `Σ_{a'} π_e(a' | x, prefix) Q̂_{l}(x, prefix ∥ a')` with
/// `l = prefix.len() + 1`.
pub fn expected_q_under_policy(
    model: &QModel,
    evaluation: &Policy,
    x: &Context,
    prefix: &[usize],
) -> Result<f64> {
    let pmf = evaluation.conditional_pmf(x, prefix)?;
    let mut extended = prefix.to_vec();
    extended.push(0);
    let mut total = 0.0;
    for (a, p) in pmf.into_iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        *extended.last_mut().expect("non-empty") = a;
        total += p * predict_q(model, x, &extended)?;
    }
    Ok(total)
}

/// Fits `Q̂_L, …, Q̂_1` in that order.
///
/// Slot `l` regresses `α_l r_l + Σ_{a'} π_e(a' | x, a_{1:l}) Q̂_{l+1}(x, a_{1:l}, a')`
/// on `(x, a_{1:l})` with sample weights `w_{1:l}`, and `Q̂_{L+1} = 0`.
pub fn fit_q_model(
    data: &LoggedDataset,
    evaluation: &Policy,
    behavior: BehaviorSource<'_>,
    learner: LearnerConfig,
    cross_fit: CrossFit,
) -> Result<QModel> {
    check_shapes(data, evaluation, behavior, None)?;
    let n = data.len();
    let k = match cross_fit {
        CrossFit::None => 1,
        CrossFit::KFold(k) => {
            if k < 2 || k > n {
                return Err(Error::InvalidConfig(format!(
                    "cannot split {n} records into {k} folds"
                )));
            }
            k
        }
    };
    let encoder = FeatureEncoder::new(data.dim(), data.n_actions());
    let slate_size = data.slate_size();
    let alpha = data.alpha().values();

    let weights = data
        .records()
        .par_iter()
        .enumerate()
        .map(|(i, r)| record_weights(r, i, evaluation, behavior, false))
        .collect::<Result<Vec<_>>>()?;

    let mut chains = Vec::with_capacity(k);
    for fold in 0..k {
        let train: Vec<usize> = (0..n).filter(|&i| k == 1 || i % k != fold).collect();
        let mut chain: Vec<Option<FittedLearner>> = vec![None; slate_size];
        let mut next = vec![0.0; train.len()];
        for l in (0..slate_size).rev() {
            let rows = train
                .par_iter()
                .zip(&next)
                .map(|(&i, &tail)| {
                    let r = &data.records()[i];
                    let x = encoder.encode(&r.context, &r.slate.items()[..=l])?;
                    let y = alpha[l] * r.rewards.values()[l] + tail;
                    Ok((x, y, weights[i].profile.cumulative[l]))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut xs = Vec::with_capacity(rows.len());
            let mut ys = Vec::with_capacity(rows.len());
            let mut ws = Vec::with_capacity(rows.len());
            for (x, y, w) in rows {
                xs.push(x);
                ys.push(y);
                ws.push(w);
            }
            let model = learner.fit(&xs, &ys, &ws)?;
            if l > 0 {
                next = train
                    .par_iter()
                    .map(|&i| {
                        let r = &data.records()[i];
                        let prefix = &r.slate.items()[..l];
                        let pmf = weights[i].pmf_e.pmf(prefix);
                        let mut extended = prefix.to_vec();
                        extended.push(0);
                        let mut features = Vec::with_capacity(encoder.len(l + 1));
                        let mut total = 0.0;
                        for (a, p) in pmf.into_iter().enumerate() {
                            if p == 0.0 {
                                continue;
                            }
                            extended[l] = a;
                            encoder.encode_into(&r.context, &extended, &mut features)?;
                            total += p * model.predict(&features);
                        }
                        Ok(total)
                    })
                    .collect::<Result<_>>()?;
            }
            chain[l] = Some(model);
        }
        chains.push(chain.into_iter().map(|m| m.expect("every slot fitted")).collect());
    }
    Ok(QModel {
        encoder,
        slate_size,
        chains,
    })
}

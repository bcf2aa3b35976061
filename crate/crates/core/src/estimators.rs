//! IPS, IIPS, RIPS and Cascade-DR estimators of a slate policy's value.
//!
//! Every estimator is a mean of per-record contributions:
//!
//! ```text
//! IPS         w_{1:L} Σ_l α_l r_l
//! IIPS        Σ_l w_l(x, a_l) α_l r_l
//! RIPS        Σ_l w_{1:l} α_l r_l
//! Cascade-DR  Σ_l [ w_{1:l} (α_l r_l - Q̂_l) + w_{1:l-1} E_{a'~π_e}[Q̂_l(x, a_{1:l-1}, a')] ]
//! ```
//!
//! with `w_{1:0} = 1`. Contributions are computed in parallel and summed in
//! record order.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{ConditionalPmf, Policy};
use crate::types::{weighted_sum, AlphaWeights, Context, LoggedDataset, LoggedRecord};

/// Where behavior probabilities come from.
#[derive(Debug, Clone, Copy)]
pub enum BehaviorSource<'a> {
    /// Logged propensities when a record has them, this policy otherwise.
    Policy(&'a Policy),
    /// Logged propensities only. Marginals for IIPS are taken to be the
    /// logged per-slot values, which is exact for a factorizable logger.
    Logged,
}

impl<'a> BehaviorSource<'a> {
    pub fn policy(&self) -> Option<&'a Policy> {
        match self {
            BehaviorSource::Policy(p) => Some(p),
            BehaviorSource::Logged => None,
        }
    }
}

/// Importance weights of one logged record.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightProfile {
    /// `π_e(a_l | x, a_{1:l-1}) / π_b(a_l | x, a_{1:l-1})`.
    pub slot_ratio: Vec<f64>,
    /// `w_{1:l}` for `l = 1..L`.
    pub cumulative: Vec<f64>,
    /// `π_e(a_l | x) / π_b(a_l | x)` with slot marginals.
    pub slot_marginal: Vec<f64>,
}

impl WeightProfile {
    /// `w(x, a) = w_{1:L}`.
    pub fn full(&self) -> f64 {
        *self.cumulative.last().expect("slates are non-empty")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EstimatorKind {
    #[serde(rename = "IPS")]
    Ips,
    #[serde(rename = "IIPS")]
    Iips,
    #[serde(rename = "RIPS")]
    Rips,
    #[serde(rename = "Cascade-DR")]
    CascadeDr,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 4] = [
        EstimatorKind::Ips,
        EstimatorKind::Iips,
        EstimatorKind::Rips,
        EstimatorKind::CascadeDr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Ips => "IPS",
            EstimatorKind::Iips => "IIPS",
            EstimatorKind::Rips => "RIPS",
            EstimatorKind::CascadeDr => "Cascade-DR",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "ips" => Ok(EstimatorKind::Ips),
            "iips" => Ok(EstimatorKind::Iips),
            "rips" => Ok(EstimatorKind::Rips),
            "cascade-dr" | "cdr" => Ok(EstimatorKind::CascadeDr),
            _ => Err(Error::InvalidConfig(format!("unknown estimator {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub value: f64,
    pub per_record: Vec<f64>,
    /// Largest full-slate weight `w(x, a)` in the data.
    pub weight_max: f64,
    pub weight_mean: f64,
}

/// A baseline `Q̂_l(x, a_{1:l})`, with `l` the prefix length.
///
/// `record` is the index of the logged record being scored, which lets
/// cross-fitted models answer with a model that did not see that record.
pub trait Baseline: Sync {
    fn slate_size(&self) -> usize;

    fn predict(&self, record: usize, x: &Context, prefix: &[usize]) -> Result<f64>;

    /// `Σ_{a'} pmf(a') Q̂_l(x, prefix ∥ a')` by exact summation.
    fn expected(&self, record: usize, x: &Context, prefix: &[usize], pmf: &[f64]) -> Result<f64> {
        let mut extended = Vec::with_capacity(prefix.len() + 1);
        extended.extend_from_slice(prefix);
        extended.push(0);
        let mut total = 0.0;
        for (a, &p) in pmf.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            *extended.last_mut().expect("non-empty") = a;
            total += p * self.predict(record, x, &extended)?;
        }
        Ok(total)
    }
}

/// `Q̂ ≡ 0`, under which Cascade-DR reduces to RIPS.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroBaseline {
    pub slate_size: usize,
}

impl Baseline for ZeroBaseline {
    fn slate_size(&self) -> usize {
        self.slate_size
    }

    fn predict(&self, _record: usize, _x: &Context, _prefix: &[usize]) -> Result<f64> {
        Ok(0.0)
    }
}

/// `Q̂ ≡ value` for every slot and input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantBaseline {
    pub slate_size: usize,
    pub value: f64,
}

impl Baseline for ConstantBaseline {
    fn slate_size(&self) -> usize {
        self.slate_size
    }

    fn predict(&self, _record: usize, _x: &Context, _prefix: &[usize]) -> Result<f64> {
        Ok(self.value)
    }
}

fn behavior_conditional(
    record: &LoggedRecord,
    index: usize,
    behavior: BehaviorSource<'_>,
    pmf_b: Option<&ConditionalPmf>,
) -> Result<Vec<f64>> {
    let slate = record.slate.items();
    let probs = match (&record.propensities, pmf_b) {
        (Some(p), _) => p.clone(),
        (None, Some(pmf)) => (0..slate.len())
            .map(|l| pmf.prob(&slate[..l], slate[l]))
            .collect(),
        (None, None) => {
            debug_assert!(behavior.policy().is_none());
            return Err(Error::MissingPropensity { record: index });
        }
    };
    match probs.iter().position(|&p| !(p > 0.0)) {
        Some(slot) => Err(Error::ZeroPropensity {
            record: index,
            slot,
        }),
        None => Ok(probs),
    }
}

pub(crate) struct RecordWeights {
    pub(crate) profile: WeightProfile,
    pub(crate) pmf_e: ConditionalPmf,
}

pub(crate) fn record_weights(
    record: &LoggedRecord,
    index: usize,
    evaluation: &Policy,
    behavior: BehaviorSource<'_>,
    need_marginal: bool,
) -> Result<RecordWeights> {
    let x = &record.context;
    let slate = record.slate.items();
    let pmf_e = evaluation.at(x)?;
    let pmf_b = match behavior.policy() {
        Some(p) if record.propensities.is_none() || (need_marginal && !p.is_factorizable()) => {
            Some(p.at(x)?)
        }
        _ => None,
    };
    let cond_b = behavior_conditional(record, index, behavior, pmf_b.as_ref())?;

    let slot_ratio: Vec<f64> = (0..slate.len())
        .map(|l| pmf_e.prob(&slate[..l], slate[l]) / cond_b[l])
        .collect();
    let cumulative = slot_ratio
        .iter()
        .scan(1.0, |w, r| {
            *w *= r;
            Some(*w)
        })
        .collect();

    let slot_marginal = if need_marginal {
        let marg_b: Vec<f64> = match (behavior.policy(), &pmf_b) {
            (Some(p), Some(_)) if !p.is_factorizable() => (0..slate.len())
                .map(|l| p.marginal_slot_pmf(x, l).map(|m| m.probs[slate[l]]))
                .collect::<Result<_>>()?,
            // a factorizable behavior policy's conditionals are its marginals
            _ => cond_b.clone(),
        };
        if let Some(slot) = marg_b.iter().position(|&p| !(p > 0.0)) {
            return Err(Error::ZeroPropensity {
                record: index,
                slot,
            });
        }
        let marg_e: Vec<f64> = if pmf_e.is_factorizable() {
            slate.iter().map(|&a| pmf_e.prob(&[], a)).collect()
        } else {
            (0..slate.len())
                .map(|l| evaluation.marginal_slot_pmf(x, l).map(|m| m.probs[slate[l]]))
                .collect::<Result<_>>()?
        };
        marg_e.iter().zip(&marg_b).map(|(e, b)| e / b).collect()
    } else {
        Vec::new()
    };

    let profile = WeightProfile {
        slot_ratio,
        cumulative,
        slot_marginal,
    };
    if profile
        .cumulative
        .iter()
        .chain(&profile.slot_marginal)
        .any(|w| !w.is_finite())
    {
        return Err(Error::NonFinite("importance weights"));
    }
    Ok(RecordWeights { profile, pmf_e })
}

/// Importance weights of `record` (the `index`-th record of its dataset).
pub fn importance_weights(
    record: &LoggedRecord,
    index: usize,
    evaluation: &Policy,
    behavior: BehaviorSource<'_>,
) -> Result<WeightProfile> {
    Ok(record_weights(record, index, evaluation, behavior, true)?.profile)
}

fn cascade_dr_term(
    record: &LoggedRecord,
    index: usize,
    alpha: &[f64],
    weights: &RecordWeights,
    baseline: &dyn Baseline,
) -> Result<f64> {
    let x = &record.context;
    let slate = record.slate.items();
    let rewards = record.rewards.values();
    let mut pmf = Vec::with_capacity(weights.pmf_e.n_actions());
    let mut w_prev = 1.0;
    let mut total = 0.0;
    for l in 0..slate.len() {
        let w = weights.profile.cumulative[l];
        let q_hat = baseline.predict(index, x, &slate[..=l])?;
        weights.pmf_e.fill(&slate[..l], &mut pmf);
        let expected = baseline.expected(index, x, &slate[..l], &pmf)?;
        total += w * (alpha[l] * rewards[l] - q_hat) + w_prev * expected;
        w_prev = w;
    }
    Ok(total)
}

fn contribution_with(
    kind: EstimatorKind,
    record: &LoggedRecord,
    index: usize,
    alpha: &[f64],
    weights: &RecordWeights,
    baseline: Option<&dyn Baseline>,
) -> Result<f64> {
    let r = record.rewards.values();
    let w = &weights.profile;
    Ok(match kind {
        EstimatorKind::Ips => w.full() * weighted_sum(alpha, r),
        EstimatorKind::Iips => (0..r.len()).map(|l| w.slot_marginal[l] * alpha[l] * r[l]).sum(),
        EstimatorKind::Rips => (0..r.len()).map(|l| w.cumulative[l] * alpha[l] * r[l]).sum(),
        EstimatorKind::CascadeDr => {
            let zero = ZeroBaseline {
                slate_size: r.len(),
            };
            cascade_dr_term(record, index, alpha, weights, baseline.unwrap_or(&zero))?
        }
    })
}

fn check_alpha(alpha: &AlphaWeights, slate_size: usize) -> Result<()> {
    if alpha.len() != slate_size {
        return Err(Error::LengthMismatch {
            what: "slot weights vs slate size",
            expected: slate_size,
            found: alpha.len(),
        });
    }
    Ok(())
}

fn check_record(record: &LoggedRecord, alpha: &AlphaWeights, evaluation: &Policy) -> Result<()> {
    check_alpha(alpha, record.slate.len())?;
    if record.slate.len() != evaluation.slate_size() {
        return Err(Error::LengthMismatch {
            what: "slate length vs evaluation policy",
            expected: evaluation.slate_size(),
            found: record.slate.len(),
        });
    }
    let n_actions = evaluation.n_actions();
    if let Some(&action) = record.slate.items().iter().find(|&&a| a >= n_actions) {
        return Err(Error::ActionOutOfRange { action, n_actions });
    }
    if let Some(d) = evaluation.dim() {
        if d != record.context.dim() {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: record.context.dim(),
            });
        }
    }
    Ok(())
}

/// Contribution of a single record to an estimator's mean.
///
/// Cascade-DR without a baseline uses `Q̂ ≡ 0`.
pub fn contribution(
    kind: EstimatorKind,
    record: &LoggedRecord,
    index: usize,
    alpha: &AlphaWeights,
    evaluation: &Policy,
    behavior: BehaviorSource<'_>,
    baseline: Option<&dyn Baseline>,
) -> Result<f64> {
    check_record(record, alpha, evaluation)?;
    let weights = record_weights(
        record,
        index,
        evaluation,
        behavior,
        kind == EstimatorKind::Iips,
    )?;
    contribution_with(kind, record, index, alpha.values(), &weights, baseline)
}

pub(crate) fn check_shapes(
    data: &LoggedDataset,
    evaluation: &Policy,
    behavior: BehaviorSource<'_>,
    baseline: Option<&dyn Baseline>,
) -> Result<()> {
    let policies = std::iter::once(evaluation).chain(behavior.policy());
    for p in policies {
        if p.slate_size() != data.slate_size() || p.n_actions() != data.n_actions() {
            return Err(Error::ShapeMismatch(format!(
                "policy with L={} and |A|={} does not match data with L={} and |A|={}",
                p.slate_size(),
                p.n_actions(),
                data.slate_size(),
                data.n_actions()
            )));
        }
        if let Some(d) = p.dim() {
            if d != data.dim() {
                return Err(Error::DimensionMismatch {
                    expected: data.dim(),
                    found: d,
                });
            }
        }
    }
    if let Some(b) = baseline {
        if b.slate_size() != data.slate_size() {
            return Err(Error::ShapeMismatch(format!(
                "baseline has {} slots, data has {}",
                b.slate_size(),
                data.slate_size()
            )));
        }
    }
    Ok(())
}

fn report(per_record: Vec<f64>, full_weights: &[f64]) -> EstimateReport {
    let n = per_record.len() as f64;
    EstimateReport {
        value: per_record.iter().sum::<f64>() / n,
        weight_max: full_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        weight_mean: full_weights.iter().sum::<f64>() / n,
        per_record,
    }
}

/// Runs one estimator over a dataset.
///
/// `baseline` is read only by Cascade-DR; `None` there means `Q̂ ≡ 0`.
pub fn estimate(
    kind: EstimatorKind,
    data: &LoggedDataset,
    evaluation: &Policy,
    behavior: BehaviorSource<'_>,
    baseline: Option<&dyn Baseline>,
) -> Result<EstimateReport> {
    check_shapes(data, evaluation, behavior, baseline)?;
    let alpha = data.alpha().values();
    let pairs: Vec<(f64, f64)> = data
        .records()
        .par_iter()
        .enumerate()
        .map(|(i, record)| {
            let weights =
                record_weights(record, i, evaluation, behavior, kind == EstimatorKind::Iips)?;
            let c = contribution_with(kind, record, i, alpha, &weights, baseline)?;
            Ok((c, weights.profile.full()))
        })
        .collect::<Result<_>>()?;
    let (per_record, full): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    Ok(report(per_record, &full))
}

pub fn ips_estimate(
    data: &LoggedDataset,
    evaluation: &Policy,
    behavior: BehaviorSource<'_>,
) -> Result<EstimateReport> {
    estimate(EstimatorKind::Ips, data, evaluation, behavior, None)
}

pub fn iips_estimate(
    data: &LoggedDataset,
    evaluation: &Policy,
    behavior: BehaviorSource<'_>,
) -> Result<EstimateReport> {
    estimate(EstimatorKind::Iips, data, evaluation, behavior, None)
}

pub fn rips_estimate(
    data: &LoggedDataset,
    evaluation: &Policy,
    behavior: BehaviorSource<'_>,
) -> Result<EstimateReport> {
    estimate(EstimatorKind::Rips, data, evaluation, behavior, None)
}

pub fn cascade_dr_estimate(
    data: &LoggedDataset,
    evaluation: &Policy,
    behavior: BehaviorSource<'_>,
    baseline: &dyn Baseline,
) -> Result<EstimateReport> {
    estimate(
        EstimatorKind::CascadeDr,
        data,
        evaluation,
        behavior,
        Some(baseline),
    )
}

/// Empirical mean of slate rewards, for data logged by the policy being
/// valued.
pub fn on_policy_estimate(data: &LoggedDataset) -> Result<EstimateReport> {
    let alpha = data.alpha().values();
    let per_record: Vec<f64> = data
        .records()
        .iter()
        .map(|r| weighted_sum(alpha, r.rewards.values()))
        .collect();
    let ones = vec![1.0; per_record.len()];
    Ok(report(per_record, &ones))
}

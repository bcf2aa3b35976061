use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{estimate, BehaviorSource, EstimatorKind};
use crate::policy::Policy;
use crate::regression::{fit_q_model, CrossFit, LearnerConfig};
use crate::rng;
use crate::types::LoggedDataset;

pub const DEFAULT_N_BOOT: usize = 20;

/// One estimator on one bootstrap replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapRow {
    pub replicate: usize,
    pub estimator: String,
    pub estimate: f64,
    pub ground_truth: f64,
    pub squared_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapConfig {
    pub estimators: Vec<EstimatorKind>,
    pub learner: LearnerConfig,
    pub cross_fit: CrossFit,
    pub n_boot: usize,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            estimators: EstimatorKind::ALL.to_vec(),
            learner: LearnerConfig::default(),
            cross_fit: CrossFit::None,
            n_boot: DEFAULT_N_BOOT,
            seed: 0,
        }
    }
}

/// Squared errors against `ground_truth` on `n_boot` resamples of `data`,
/// each drawn with replacement at the original size. Replicate `r` draws its
/// indices from stream `r` of the seed; Cascade-DR refits `Q̂` per replicate.
pub fn bootstrap_evaluate(
    data: &LoggedDataset,
    evaluation: &Policy,
    behavior: BehaviorSource<'_>,
    ground_truth: f64,
    config: &BootstrapConfig,
) -> Result<Vec<BootstrapRow>> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if config.n_boot == 0 {
        return Err(Error::InvalidConfig("n_boot must be positive".into()));
    }
    if !ground_truth.is_finite() {
        return Err(Error::NonFinite("ground truth"));
    }
    let n = data.len();
    let per_replicate: Vec<Vec<BootstrapRow>> = (0..config.n_boot)
        .into_par_iter()
        .map(|replicate| {
            let mut rng = rng::stream(config.seed, replicate as u64);
            let indices: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let sample = data.resample(&indices)?;
            config
                .estimators
                .iter()
                .map(|&kind| {
                    let value = if kind == EstimatorKind::CascadeDr {
                        let q = fit_q_model(&sample, evaluation, behavior, config.learner, config.cross_fit)?;
                        estimate(kind, &sample, evaluation, behavior, Some(&q))?.value
                    } else {
                        estimate(kind, &sample, evaluation, behavior, None)?.value
                    };
                    Ok(BootstrapRow {
                        replicate,
                        estimator: kind.name().to_owned(),
                        estimate: value,
                        ground_truth,
                        squared_error: (ground_truth - value).powi(2),
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(per_replicate.into_iter().flatten().collect())
}

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::EstimatorKind;
use crate::policy::LAMBDA_GRID;
use crate::regression::{CrossFit, LearnerConfig};
use crate::synth::{InteractionKind, RewardStructure, TRUTH_ENUMERATION_LIMIT};
use crate::types::AlphaKind;

/// An estimator run by the harness. `Oracle` reports the ground truth and
/// serves as a plumbing check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum EstimatorChoice {
    Estimator(EstimatorKind),
    Oracle,
}

impl EstimatorChoice {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorChoice::Estimator(kind) => kind.name(),
            EstimatorChoice::Oracle => "oracle",
        }
    }
}

impl fmt::Display for EstimatorChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("oracle") {
            return Ok(EstimatorChoice::Oracle);
        }
        s.parse().map(EstimatorChoice::Estimator)
    }
}

impl TryFrom<String> for EstimatorChoice {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<EstimatorChoice> for String {
    fn from(choice: EstimatorChoice) -> Self {
        choice.name().to_owned()
    }
}

impl From<EstimatorKind> for EstimatorChoice {
    fn from(kind: EstimatorKind) -> Self {
        EstimatorChoice::Estimator(kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthKind {
    #[default]
    Exact,
    MonteCarlo,
}

/// How `V(π_e)` is computed for each configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruthConfig {
    pub mode: TruthKind,
    /// Fresh contexts averaged over.
    pub contexts: usize,
    /// Slates per context in Monte Carlo mode.
    pub mc_slates: usize,
}

impl Default for TruthConfig {
    fn default() -> Self {
        Self {
            mode: TruthKind::Exact,
            contexts: 10_000,
            mc_slates: 1_000,
        }
    }
}

/// Every knob of a synthetic experiment. The defaults are the standard grid
/// with 1000 seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n_values: Vec<usize>,
    pub slate_sizes: Vec<usize>,
    pub reward_structures: Vec<RewardStructure>,
    pub interactions: Vec<InteractionKind>,
    pub lambdas: Vec<f64>,
    pub n_actions: usize,
    pub dim: usize,
    pub alpha: AlphaKind,
    pub estimators: Vec<EstimatorChoice>,
    pub learner: LearnerConfig,
    pub cross_fit: CrossFit,
    pub seed_start: u64,
    pub seed_count: u64,
    pub truth: TruthConfig,
    /// Slate size held fixed while sweeping `n`.
    pub sweep_slate_size: usize,
    /// Data size held fixed while sweeping `L` or `λ`.
    pub sweep_n: usize,
    pub interaction_scale: f64,
    /// Worker count; `SLATE_OPE_THREADS` takes precedence.
    pub threads: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_values: vec![250, 500, 1000, 2000, 4000],
            slate_sizes: (3..=7).collect(),
            reward_structures: RewardStructure::ALL.to_vec(),
            interactions: InteractionKind::ALL.to_vec(),
            lambdas: LAMBDA_GRID.to_vec(),
            n_actions: 5,
            dim: 5,
            alpha: AlphaKind::Uniform,
            estimators: EstimatorKind::ALL.iter().map(|&k| k.into()).collect(),
            learner: LearnerConfig::default(),
            cross_fit: CrossFit::None,
            seed_start: 0,
            seed_count: 1000,
            truth: TruthConfig::default(),
            sweep_slate_size: 5,
            sweep_n: 1000,
            interaction_scale: 1.0,
            threads: None,
        }
    }
}

fn non_empty<T>(v: &[T], what: &str) -> Result<()> {
    if v.is_empty() {
        return Err(Error::InvalidConfig(format!("{what} must be non-empty")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.message().to_owned()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config fields are representable in TOML")
    }

    pub fn seeds(&self) -> std::ops::Range<u64> {
        self.seed_start..self.seed_start + self.seed_count
    }

    pub fn validate(&self) -> Result<()> {
        non_empty(&self.n_values, "n_values")?;
        non_empty(&self.slate_sizes, "slate_sizes")?;
        non_empty(&self.reward_structures, "reward_structures")?;
        non_empty(&self.interactions, "interactions")?;
        non_empty(&self.lambdas, "lambdas")?;
        non_empty(&self.estimators, "estimators")?;
        if self.n_values.contains(&0) || self.sweep_n == 0 {
            return Err(Error::InvalidConfig("data sizes must be positive".into()));
        }
        if self.slate_sizes.contains(&0) || self.sweep_slate_size == 0 {
            return Err(Error::NonPositiveSlateSize);
        }
        if let Some(&bad) = self.lambdas.iter().find(|l| !(-1.0..1.0).contains(*l)) {
            return Err(Error::LambdaOutOfRange(bad));
        }
        if self.n_actions == 0 || self.dim == 0 {
            return Err(Error::InvalidConfig(
                "n_actions and dim must be positive".into(),
            ));
        }
        if self.seed_count == 0 {
            return Err(Error::InvalidConfig("seed_count must be positive".into()));
        }
        if self.seed_start.checked_add(self.seed_count).is_none() {
            return Err(Error::InvalidConfig("seed range overflows".into()));
        }
        if !self.interaction_scale.is_finite() {
            return Err(Error::NonFinite("interaction_scale"));
        }
        if self.truth.contexts == 0 {
            return Err(Error::InvalidConfig("truth.contexts must be positive".into()));
        }
        if self.truth.mode == TruthKind::MonteCarlo && self.truth.mc_slates == 0 {
            return Err(Error::InvalidConfig("truth.mc_slates must be positive".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidConfig("threads must be positive".into()));
        }
        if let CrossFit::KFold(k) = self.cross_fit {
            if k < 2 {
                return Err(Error::InvalidConfig("cross-fitting needs at least 2 folds".into()));
            }
        }
        if self.truth.mode == TruthKind::Exact {
            let largest = self
                .slate_sizes
                .iter()
                .chain([&self.sweep_slate_size])
                .max()
                .copied()
                .unwrap_or(1);
            let size = (self.n_actions as u128).checked_pow(largest as u32);
            if size.is_none_or(|s| s > TRUTH_ENUMERATION_LIMIT) {
                return Err(Error::InvalidConfig(format!(
                    "exact ground truth needs |A|^L <= {TRUTH_ENUMERATION_LIMIT}; use truth.mode = \"monte_carlo\""
                )));
            }
        }
        Ok(())
    }
}

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{EstimatorChoice, ExperimentConfig, TruthKind};
use crate::error::{Error, Result};
use crate::estimators::{estimate, BehaviorSource, EstimatorKind};
use crate::policy::{make_behavior_policy, make_evaluation_policy, Policy};
use crate::regression::fit_q_model;
use crate::rng;
use crate::synth::{EnvConfig, InteractionKind, RewardStructure, SyntheticEnv, TruthMode};
use crate::types::make_alpha_weights;

/// Worker-count override read by [`run_experiment`].
pub const THREADS_ENV: &str = "SLATE_OPE_THREADS";

/// Which configuration variable is iterated over its grid for every seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    /// `n` over its grid with `L` fixed.
    N,
    /// `L` over its grid with `n` fixed.
    Slate,
    /// `λ` over its grid with `n` fixed.
    Lambda,
    /// Everything sampled once per seed.
    Random,
}

impl SweepMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepMode::N => "n",
            SweepMode::Slate => "slate",
            SweepMode::Lambda => "lambda",
            SweepMode::Random => "random",
        }
    }
}

impl fmt::Display for SweepMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "n" => Ok(SweepMode::N),
            "slate" | "L" => Ok(SweepMode::Slate),
            "lambda" => Ok(SweepMode::Lambda),
            "random" => Ok(SweepMode::Random),
            other => Err(Error::InvalidConfig(format!(
                "unknown sweep {other:?}; expected n, slate, lambda or random"
            ))),
        }
    }
}

/// One squared error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub seed: u64,
    pub n: usize,
    #[serde(rename = "L")]
    pub slate_size: usize,
    pub reward_structure: RewardStructure,
    pub interaction: InteractionKind,
    pub lambda: f64,
    pub estimator: String,
    pub estimate: f64,
    pub ground_truth: f64,
    pub squared_error: f64,
}

/// A drawn configuration `(φ, λ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Configuration {
    pub n: usize,
    pub slate_size: usize,
    pub reward_structure: RewardStructure,
    pub interaction: InteractionKind,
    pub lambda: f64,
}

fn pick<T: Copy, R: Rng + ?Sized>(items: &[T], rng: &mut R) -> T {
    items[rng.random_range(0..items.len())]
}

/// The configurations run for `seed`, in output order.
///
/// All five variables are drawn from the seed's own stream in a fixed order
/// whatever the mode, then the swept variable is replaced by its grid and
/// its fixed companion by the configured value.
pub fn seed_configurations(config: &ExperimentConfig, mode: SweepMode, seed: u64) -> Vec<Configuration> {
    let mut rng = rng::stream(seed, 0);
    let drawn = Configuration {
        n: pick(&config.n_values, &mut rng),
        slate_size: pick(&config.slate_sizes, &mut rng),
        reward_structure: pick(&config.reward_structures, &mut rng),
        interaction: pick(&config.interactions, &mut rng),
        lambda: pick(&config.lambdas, &mut rng),
    };
    match mode {
        SweepMode::Random => vec![drawn],
        SweepMode::N => config
            .n_values
            .iter()
            .map(|&n| Configuration {
                n,
                slate_size: config.sweep_slate_size,
                ..drawn
            })
            .collect(),
        SweepMode::Slate => config
            .slate_sizes
            .iter()
            .map(|&slate_size| Configuration {
                n: config.sweep_n,
                slate_size,
                ..drawn
            })
            .collect(),
        SweepMode::Lambda => config
            .lambdas
            .iter()
            .map(|&lambda| Configuration {
                n: config.sweep_n,
                lambda,
                ..drawn
            })
            .collect(),
    }
}

/// Runs every seed of `config` and returns rows ordered by seed, then grid
/// point, then estimator.
pub fn run_experiment(config: &ExperimentConfig, mode: SweepMode) -> Result<Vec<ResultRow>> {
    config.validate()?;
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => Some(v.trim().parse::<usize>().ok().filter(|&t| t > 0).ok_or_else(|| {
            Error::InvalidConfig(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))
        })?),
        Err(_) => config.threads,
    };
    let pool = {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(t) = threads {
            builder = builder.num_threads(t);
        }
        builder
            .build()
            .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?
    };
    let seeds: Vec<u64> = config.seeds().collect();
    let per_seed: Vec<Vec<ResultRow>> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| run_seed(config, mode, seed))
            .collect::<Result<_>>()
    })?;
    Ok(per_seed.into_iter().flatten().collect())
}

/// Rows of a single seed. Re-running a seed alone reproduces its rows.
pub fn run_seed(config: &ExperimentConfig, mode: SweepMode, seed: u64) -> Result<Vec<ResultRow>> {
    let configurations = seed_configurations(config, mode, seed);
    let first = configurations[0];
    let env_config = EnvConfig {
        dim: config.dim,
        n_actions: config.n_actions,
        slate_size: first.slate_size,
        alpha: make_alpha_weights(&config.alpha, first.slate_size)?,
        reward_structure: first.reward_structure,
        interaction_kind: first.interaction,
        interaction_scale: config.interaction_scale,
    };
    let base_env = SyntheticEnv::sample(env_config, &mut rng::stream(seed, 1))?;
    let base_behavior = make_behavior_policy(
        config.dim,
        config.n_actions,
        first.slate_size,
        &mut rng::stream(seed, 2),
    )?;
    let truth_contexts = base_env.sample_contexts(config.truth.contexts, &mut rng::stream(seed, 3))?;
    let truth_mode = match config.truth.mode {
        TruthKind::Exact => TruthMode::Exact,
        TruthKind::MonteCarlo => TruthMode::MonteCarlo {
            slates: config.truth.mc_slates,
            seed: rng::stream(seed, 4).random(),
        },
    };

    let mut truths: HashMap<(usize, u64), f64> = HashMap::new();
    let mut rows = Vec::with_capacity(configurations.len() * config.estimators.len());
    for (grid_index, c) in configurations.iter().enumerate() {
        let env = base_env
            .with_slate_size(c.slate_size, make_alpha_weights(&config.alpha, c.slate_size)?)?
            .with_structure(c.reward_structure, c.interaction);
        let behavior = base_behavior.with_slate_size(c.slate_size)?;
        let evaluation: Policy = make_evaluation_policy(&behavior, c.lambda)?.into();
        let behavior: Policy = behavior.into();

        // the reward structure is fixed within a seed, so (L, λ) identifies π_e's value
        let key = (c.slate_size, c.lambda.to_bits());
        let truth = match truths.get(&key) {
            Some(&v) => v,
            None => {
                let v = env.true_policy_value(&evaluation, &truth_contexts, truth_mode)?;
                truths.insert(key, v);
                v
            }
        };

        let data = env.generate_dataset(
            &behavior,
            c.n,
            &mut rng::stream(seed, 1000 + grid_index as u64),
        )?;
        let source = BehaviorSource::Policy(&behavior);
        for &choice in &config.estimators {
            let value = match choice {
                EstimatorChoice::Oracle => truth,
                EstimatorChoice::Estimator(EstimatorKind::CascadeDr) => {
                    let q = fit_q_model(&data, &evaluation, source, config.learner, config.cross_fit)?;
                    estimate(EstimatorKind::CascadeDr, &data, &evaluation, source, Some(&q))?.value
                }
                EstimatorChoice::Estimator(kind) => {
                    estimate(kind, &data, &evaluation, source, None)?.value
                }
            };
            rows.push(ResultRow {
                seed,
                n: c.n,
                slate_size: c.slate_size,
                reward_structure: c.reward_structure,
                interaction: c.interaction,
                lambda: c.lambda,
                estimator: choice.name().to_owned(),
                estimate: value,
                ground_truth: truth,
                squared_error: (truth - value).powi(2),
            });
        }
    }
    Ok(rows)
}

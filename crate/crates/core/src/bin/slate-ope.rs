use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use slate_ope::estimators::{estimate, on_policy_estimate, BehaviorSource, EstimatorKind};
use slate_ope::harness::{
    aggregate_mse, bootstrap_evaluate, io, run_experiment, write_summary, BootstrapConfig,
    EstimatorChoice, ExperimentConfig, GroupKey, SweepMode, DEFAULT_N_BOOT,
};
use slate_ope::regression::{fit_q_model, CrossFit, LearnerConfig};
use slate_ope::verify::run_oracle_suite;
use slate_ope::Result;

#[derive(Parser)]
#[command(name = "slate-ope", version, about = "Off-policy evaluation for slate policies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the synthetic experiment and write squared errors as CSV.
    SynthExperiment {
        /// n, slate, lambda or random.
        #[arg(long, default_value = "random")]
        sweep: SweepMode,
        /// Number of seeds, overriding the config.
        #[arg(long)]
        seeds: Option<u64>,
        /// TOML file with experiment settings.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output CSV; the MSE summary goes to `<out>.summary.json`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate a policy's value from a logged dataset.
    Evaluate {
        #[arg(long)]
        dataset: PathBuf,
        /// Evaluation policy (JSON).
        #[arg(long)]
        policy: PathBuf,
        /// Comma-separated estimator names.
        #[arg(long, value_delimiter = ',', default_value = "IPS,IIPS,RIPS,Cascade-DR")]
        estimators: Vec<EstimatorKind>,
        /// tree or ridge.
        #[arg(long, default_value = "tree")]
        q_learner: LearnerConfig,
        /// Behavior policy (JSON), for datasets without propensities.
        #[arg(long)]
        behavior_policy: Option<PathBuf>,
        /// Cross-fit Q̂ over this many folds.
        #[arg(long)]
        folds: Option<usize>,
    },
    /// Bootstrap squared errors of estimators on dataset A against the
    /// on-policy value of dataset B.
    Bootstrap {
        #[arg(long)]
        dataset_a: PathBuf,
        #[arg(long)]
        dataset_b: PathBuf,
        /// Policy that logged dataset B (JSON).
        #[arg(long)]
        policy: PathBuf,
        #[arg(long, default_value_t = DEFAULT_N_BOOT)]
        n_boot: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_delimiter = ',', default_value = "IPS,IIPS,RIPS,Cascade-DR")]
        estimators: Vec<EstimatorKind>,
        #[arg(long, default_value = "tree")]
        q_learner: LearnerConfig,
        #[arg(long)]
        behavior_policy: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the exact oracle checks on tiny instances.
    Verify,
}

fn summary_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".summary.json");
    PathBuf::from(name)
}

fn load_behavior(path: &Option<PathBuf>) -> Result<Option<slate_ope::policy::Policy>> {
    path.as_deref().map(io::load_policy).transpose()
}

fn run(command: Command) -> Result<bool> {
    match command {
        Command::SynthExperiment {
            sweep,
            seeds,
            config,
            out,
        } => {
            let mut cfg = match config {
                Some(path) => ExperimentConfig::load(&path)?,
                None => ExperimentConfig::default(),
            };
            if let Some(s) = seeds {
                cfg.seed_count = s;
            }
            let rows = run_experiment(&cfg, sweep)?;
            io::save_csv(&rows, &out)?;
            let keys: Vec<GroupKey> = match sweep {
                SweepMode::N => vec![GroupKey::RewardStructure, GroupKey::N],
                SweepMode::Slate => vec![GroupKey::RewardStructure, GroupKey::SlateSize],
                SweepMode::Lambda => vec![GroupKey::RewardStructure, GroupKey::Lambda],
                SweepMode::Random => vec![GroupKey::RewardStructure],
            };
            let relative = cfg
                .estimators
                .contains(&EstimatorChoice::Estimator(EstimatorKind::CascadeDr));
            let table = aggregate_mse(&rows, &keys, relative)?;
            write_summary(&summary_path(&out), &table, &keys)?;
            eprintln!("wrote {} rows to {}", rows.len(), out.display());
            Ok(true)
        }
        Command::Evaluate {
            dataset,
            policy,
            estimators,
            q_learner,
            behavior_policy,
            folds,
        } => {
            let data = io::load_dataset(&dataset)?;
            let evaluation = io::load_policy(&policy)?;
            let behavior_policy = load_behavior(&behavior_policy)?;
            let source = match &behavior_policy {
                Some(p) => BehaviorSource::Policy(p),
                None => BehaviorSource::Logged,
            };
            let cross_fit = folds.map_or(CrossFit::None, CrossFit::KFold);
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            writeln!(out, "estimator,estimate,weight_max,weight_mean")?;
            for kind in estimators {
                let report = if kind == EstimatorKind::CascadeDr {
                    let q = fit_q_model(&data, &evaluation, source, q_learner, cross_fit)?;
                    estimate(kind, &data, &evaluation, source, Some(&q))?
                } else {
                    estimate(kind, &data, &evaluation, source, None)?
                };
                writeln!(
                    out,
                    "{kind},{},{},{}",
                    report.value, report.weight_max, report.weight_mean
                )?;
            }
            Ok(true)
        }
        Command::Bootstrap {
            dataset_a,
            dataset_b,
            policy,
            n_boot,
            seed,
            estimators,
            q_learner,
            behavior_policy,
            out,
        } => {
            let data_a = io::load_dataset(&dataset_a)?;
            let data_b = io::load_dataset(&dataset_b)?;
            let evaluation = io::load_policy(&policy)?;
            let behavior_policy = load_behavior(&behavior_policy)?;
            let source = match &behavior_policy {
                Some(p) => BehaviorSource::Policy(p),
                None => BehaviorSource::Logged,
            };
            let truth = on_policy_estimate(&data_b)?.value;
            let config = BootstrapConfig {
                estimators,
                learner: q_learner,
                n_boot,
                seed,
                ..Default::default()
            };
            let rows = bootstrap_evaluate(&data_a, &evaluation, source, truth, &config)?;
            io::save_csv(&rows, &out)?;
            eprintln!("wrote {} rows to {}", rows.len(), out.display());
            Ok(true)
        }
        Command::Verify => {
            let mut all = true;
            for check in run_oracle_suite()? {
                let tag = if check.passed { "PASS" } else { "FAIL" };
                println!("{tag} {}: {}", check.name, check.detail);
                all &= check.passed;
            }
            Ok(all)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}

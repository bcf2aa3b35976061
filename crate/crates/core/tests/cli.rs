use std::path::Path;
use std::process::{Command, Output};

use slate_ope::harness::io;
use slate_ope::policy::{make_behavior_policy, make_evaluation_policy, Policy};
use slate_ope::rng;
use slate_ope::synth::{EnvConfig, InteractionKind, RewardStructure, SyntheticEnv};

fn slate_ope(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slate-ope"))
        .args(args)
        .output()
        .unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Writes datasets a and b plus both policies into `dir`.
fn fixtures(dir: &Path) {
    let cfg = EnvConfig::standard_setup(3, RewardStructure::Cascade, InteractionKind::Additive).unwrap();
    let env = SyntheticEnv::sample(cfg, &mut rng::seeded(1)).unwrap();
    let a = make_behavior_policy(5, 5, 3, &mut rng::seeded(2)).unwrap();
    let b: Policy = make_evaluation_policy(&a, 0.5).unwrap().into();
    let a: Policy = a.into();
    let data_a = env.generate_dataset(&a, 300, &mut rng::seeded(3)).unwrap();
    let data_b = env.generate_dataset(&b, 300, &mut rng::seeded(4)).unwrap();
    io::save_dataset(&data_a, &dir.join("a.jsonl")).unwrap();
    io::save_dataset(&data_b, &dir.join("b.jsonl")).unwrap();
    io::save_policy(&a, &dir.join("pa.json")).unwrap();
    io::save_policy(&b, &dir.join("pb.json")).unwrap();
}

#[test]
fn synth_experiment_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.toml");
    std::fs::write(
        &config,
        "n_values = [100, 200]\nslate_sizes = [2, 3]\n[truth]\ncontexts = 200\n",
    )
    .unwrap();
    let out = dir.path().join("r.csv");
    let o = slate_ope(&[
        "synth-experiment", "--sweep", "n", "--seeds", "3", "--config", p(&config), "--out", p(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "seed,n,L,reward_structure,interaction,lambda,estimator,estimate,ground_truth,squared_error"
    );
    assert_eq!(lines.count(), 3 * 2 * 4);
    assert!(!text.contains('\r'));

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.csv.summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["group_by"], serde_json::json!(["reward_structure", "n"]));
    for row in summary["rows"].as_array().unwrap() {
        if row["estimator"] == "Cascade-DR" {
            assert_eq!(row["relative_mse"], 1.0);
        }
    }
}

#[test]
fn evaluate_prints_one_line_per_estimator() {
    let dir = tempfile::tempdir().unwrap();
    fixtures(dir.path());
    let o = slate_ope(&[
        "evaluate",
        "--dataset", p(&dir.path().join("a.jsonl")),
        "--policy", p(&dir.path().join("pb.json")),
        "--estimators", "ips,rips,cascade-dr",
        "--q-learner", "ridge",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines[0], "estimator,estimate,weight_max,weight_mean");
    assert_eq!(lines.len(), 4);
    assert!(lines[3].starts_with("Cascade-DR,"));
}

#[test]
fn bootstrap_rows_are_replicates_times_estimators() {
    let dir = tempfile::tempdir().unwrap();
    fixtures(dir.path());
    let out = dir.path().join("boot.csv");
    let o = slate_ope(&[
        "bootstrap",
        "--dataset-a", p(&dir.path().join("a.jsonl")),
        "--dataset-b", p(&dir.path().join("b.jsonl")),
        "--policy", p(&dir.path().join("pb.json")),
        "--n-boot", "20",
        "--out", p(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("replicate,estimator,estimate,ground_truth,squared_error\n"));
    assert_eq!(text.lines().count(), 1 + 20 * 4);
}

#[test]
fn verify_reports_each_check() {
    let o = slate_ope(&["verify"]);
    let stdout = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[..4].iter().all(|l| l.starts_with("PASS")), "{stdout}");
    // bounded baselines can increase the variance, so the last check fails
    assert!(lines[4].starts_with("FAIL"));
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.jsonl");
    let o = slate_ope(&["evaluate", "--dataset", p(&missing), "--policy", p(&missing)]);
    assert_eq!(o.status.code(), Some(2));

    assert_eq!(slate_ope(&["verify", "--bogus"]).status.code(), Some(1));
    assert_eq!(slate_ope(&["synth-experiment", "--sweep", "x", "--out", "r.csv"]).status.code(), Some(1));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "lambdas = [2.0]\n").unwrap();
    let out = dir.path().join("r.csv");
    let o = slate_ope(&["synth-experiment", "--config", p(&bad), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("[-1, 1)"));

    let garbled = dir.path().join("g.jsonl");
    std::fs::write(&garbled, "{\"slate_size\":1,\"n_actions\":2,\"dim\":1,\"alpha\":[1.0]}\nnope\n").unwrap();
    fixtures(dir.path());
    let o = slate_ope(&["evaluate", "--dataset", p(&garbled), "--policy", p(&dir.path().join("pa.json"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));

    assert!(slate_ope(&["--help"]).status.success());
}

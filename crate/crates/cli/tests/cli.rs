use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL: &str = r#"
seed = 3
distribution = [0.5, 0.5]

[scenario]
kind = "matrices"
horizon = 4
x0 = [1.0, -0.5]
a = [[1.0, 0.1], [0.0, 0.9]]
b_leader = [[0.0], [0.1]]
sigma = [[0.01, 0.0], [0.0, 0.01]]
q_leader = [[1.0, 0.0], [0.0, 0.5]]
r_leader = [[0.1]]
q_terminal = [[1.0, 0.0], [0.0, 0.5]]

[[scenario.followers]]
b_follower = [[0.1], [0.0]]
q_follower = [[1.0, 0.0], [0.0, 1.0]]
r_follower = [[0.5]]

[[scenario.followers]]
b_follower = [[0.2], [0.05]]
q_follower = [[2.0, 0.0], [0.0, 0.5]]
r_follower = [[1.0]]

[train]
max_iter = 5
max_gd = 5

[experiments]
mc_runs = 10
transfer_source = 1
individual_steps = 50
"#;

fn stackmeta(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stackmeta"))
        .args(args)
        .current_dir(dir)
        .env_remove("STACKMETA_OUT")
        .output()
        .expect("binary runs")
}

fn workspace(config: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), config).unwrap();
    dir
}

fn files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (PathBuf::from(p.file_name().unwrap()), fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    out
}

#[test]
fn same_seed_gives_identical_artifacts() {
    let runs: Vec<_> = (0..2)
        .map(|_| {
            let dir = workspace(SMALL);
            let out = stackmeta(dir.path(), &["transfer", "--config", "run.toml", "--out", "out"]);
            assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
            let produced = files(&dir.path().join("out"));
            (dir, produced)
        })
        .collect();
    assert!(runs[0].1.len() > 10);
    assert_eq!(runs[0].1, runs[1].1);
}

#[test]
fn seed_override_changes_results() {
    let dir = workspace(SMALL);
    for (seed, out) in [("1", "a"), ("2", "b")] {
        let o = stackmeta(dir.path(), &["train", "--config", "run.toml", "--seed", seed, "--out", out]);
        assert!(o.status.success());
    }
    let a = fs::read(dir.path().join("a/meta_model.txt")).unwrap();
    let b = fs::read(dir.path().join("b/meta_model.txt")).unwrap();
    assert_ne!(a, b);
    let prov = fs::read_to_string(dir.path().join("a/train_provenance.txt")).unwrap();
    assert!(prov.contains("seed = 1 [set on command line]"), "{prov}");
}

#[test]
fn simulate_uses_trained_model() {
    let dir = workspace(SMALL);
    assert!(stackmeta(dir.path(), &["train", "--config", "run.toml", "--out", "out"]).status.success());
    let o = stackmeta(
        dir.path(),
        &["simulate", "--config", "run.toml", "--out", "out", "--model", "out/meta_model.txt", "--runs", "7"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut reader = csv_rows(&dir.path().join("out/simulate.csv"));
    assert_eq!(reader.remove(0), ["type", "expected_cost", "simulated_mean", "simulated_variance", "standard_error", "runs"]);
    assert_eq!(reader.len(), 2);
    assert!(reader.iter().all(|r| r[5] == "7"));
    let costs = csv_rows(&dir.path().join("out/costs_simulated_type1.csv"));
    assert_eq!(costs.len(), 8);
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn wrong_model_shape_is_rejected() {
    let dir = workspace(SMALL);
    fs::write(dir.path().join("bad.txt"), "stackmeta-model 2 2\n0 0\n0 0\n").unwrap();
    let o = stackmeta(dir.path(), &["simulate", "--config", "run.toml", "--out", "out", "--model", "bad.txt"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("dimension mismatch"), "{err}");
}

#[test]
fn invalid_configuration_exits_with_one() {
    for bad in [
        "distribution = [0.5, 0.6]\n",
        "unknown_key = 1\n",
        "[train]\nalpha = -1.0\n",
        "[experiments]\ntransfer_source = 9\n",
        "seed = \n",
    ] {
        let dir = workspace(bad);
        let o = stackmeta(dir.path(), &["train", "--config", "run.toml", "--out", "out"]);
        assert_eq!(o.status.code(), Some(1), "config {bad:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!o.stderr.is_empty());
    }
    let dir = workspace("");
    assert_eq!(stackmeta(dir.path(), &["train", "--config", "missing.toml"]).status.code(), Some(1));
    assert_eq!(stackmeta(dir.path(), &["no-such-command"]).status.code(), Some(1));
    assert_eq!(stackmeta(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn divergence_exits_with_two() {
    let config = format!("{SMALL}\n").replace("max_gd = 5", "max_gd = 5\nalpha = 1e6\ndivergence_bound = 10.0");
    let dir = workspace(&config);
    let o = stackmeta(dir.path(), &["train", "--config", "run.toml", "--out", "out"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn gradient_checks_pass_on_default_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let o = stackmeta(dir.path(), &["check-gradients", "--out", "out"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/check_gradients_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["failed"], 0);
    assert_eq!(summary["total"], 35);
}

#[test]
fn output_dir_from_environment() {
    let dir = workspace(SMALL);
    let o = Command::new(env!("CARGO_BIN_EXE_stackmeta"))
        .args(["check-gradients", "--config", "run.toml"])
        .current_dir(dir.path())
        .env("STACKMETA_OUT", "env_out")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(dir.path().join("env_out/gradient_checks.csv").exists());
}

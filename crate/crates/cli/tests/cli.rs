use std::path::Path;
use std::process::{Command, Output};

const SMALL_PINN: &[&str] = &[
    "pinn.iterations=20",
    "pinn.cadence=10",
    "pinn.rad.pool=200",
    "pinn.test_points=100",
    "rl.batch=4",
    "rl.hidden=[8]",
    "train.warmup=2",
];

const SMALL_LYAPUNOV: &[&str] = &[
    "lyapunov.resample_steps=2",
    "lyapunov.level_set.batch=50",
    "lyapunov.level_set.inner_iters=1",
    "lyapunov.level_set.steps_per_iter=2",
    "lyapunov.grid_resolution=11",
    "lyapunov.grid_horizon=200",
    "rl.batch=4",
    "rl.hidden=[8]",
    "train.warmup=2",
];

fn harvest(dir: &Path, args: &[&str], sets: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_harvest"));
    cmd.current_dir(dir).env_remove("HARVEST_CACHE_DIR").args(args);
    for s in sets {
        cmd.args(["--set", s]);
    }
    cmd.output().expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn entries(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> =
        std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    names.sort();
    names
}

#[test]
fn sanity_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = harvest(dir.path(), &["sanity"], &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS ")).count(), 3, "{text}");
}

#[test]
fn missing_checkpoint_exits_one_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let out = harvest(dir.path(), &["eval", "--checkpoint", "missing.json", "--out", "o"], &[]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("checkpoint not found: missing.json"), "{err}");
    assert_eq!(err.lines().count(), 1, "{err}");
}

#[test]
fn bad_configuration_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases: &[&[&str]] = &[
        &["baseline", "--env", "pendulum"],
        &["baseline", "--set", "pinn.cadence=7"],
        &["baseline", "--set", "pinn.unknown=1"],
        &["baseline", "--set", "novalue"],
        &["baseline", "--config", "absent.toml"],
        &["train-rl", "--set", "agent=\"none\""],
        &["baseline", "--selector", "fast"],
        &["baseline", "--env", "lyapunov", "--selector", "2.5"],
        &["frobnicate"],
    ];
    for args in cases {
        let out = harvest(dir.path(), args, &[]);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", stderr(&out));
        assert!(stderr(&out).contains("Usage: harvest"), "{args:?}: {}", stderr(&out));
    }
    // Nothing is created for a rejected configuration.
    assert!(entries(dir.path()).is_empty());
}

#[test]
fn config_file_and_overrides_layer() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "env = \"wave\"\nrun_id = \"layered\"\n[pinn]\niterations = 40\n").unwrap();
    let out = harvest(
        dir.path(),
        &["baseline", "--config", "c.toml", "--env", "diffusion", "--selector", "sobol", "--seed", "2", "--out", "o"],
        SMALL_PINN,
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("o/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["env"], "diffusion");
    assert_eq!(manifest["config"]["run_id"], "layered");
    assert_eq!(manifest["config"]["pinn"]["iterations"], 20);
    assert_eq!(manifest["seeds"], serde_json::json!([2]));
    let csv = std::fs::read_to_string(dir.path().join("o/metrics.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.starts_with("layered/sobol,2,0,")), "{csv}");
}

#[test]
fn repeated_baseline_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for o in ["a", "b"] {
        let args = ["baseline", "--env", "diffusion", "--selector", "random", "--seed", "0", "--out", o];
        let out = harvest(dir.path(), &args, SMALL_PINN);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let a = std::fs::read(dir.path().join("a/metrics.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b/metrics.csv")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);
    assert_eq!(entries(dir.path()), ["a", "b"]);
}

#[test]
fn train_then_evaluate_lyapunov() {
    let dir = tempfile::tempdir().unwrap();
    let run = |o: &str| {
        let args = ["train-rl", "--env", "lyapunov", "--seed", "1", "--out", o, "--set", "train.episodes=2"];
        let out = harvest(dir.path(), &args, SMALL_LYAPUNOV);
        assert!(out.status.success(), "{}", stderr(&out));
    };
    run("t1");
    run("t2");
    for name in ["metrics.csv", "policy.json"] {
        assert_eq!(
            std::fs::read(dir.path().join("t1").join(name)).unwrap(),
            std::fs::read(dir.path().join("t2").join(name)).unwrap(),
            "{name}"
        );
    }
    let args = ["eval", "--env", "lyapunov", "--seed", "1", "--checkpoint", "t1/policy.json", "--out", "e"];
    let out = harvest(dir.path(), &args, SMALL_LYAPUNOV);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("e/metrics.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("run/eval,1,2,") && l.contains(",safe_set_fraction,")), "{csv}");

    let args = ["eval", "--env", "diffusion", "--checkpoint", "t1/policy.json", "--out", "w"];
    let out = harvest(dir.path(), &args, SMALL_PINN);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("not trained for the diffusion"), "{}", stderr(&out));
    assert_eq!(entries(dir.path()), ["e", "t1", "t2", "w"]);
}

#[test]
fn documented_defaults_match_the_built_in_config() {
    let readme = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../README.md")).unwrap();
    let block = readme.split("```toml\n").nth(1).unwrap().split("```").next().unwrap();
    let mut documented: harvest::harness::ExperimentConfig = toml::from_str(block).unwrap();
    let defaults = harvest::harness::ExperimentConfig::default();
    // The torque limit is documented rounded to six digits.
    let (doc_tau, def_tau) = (documented.lyapunov.pendulum.torque_limit, defaults.lyapunov.pendulum.torque_limit);
    assert!((doc_tau - def_tau).abs() < 1e-6, "{doc_tau} vs {def_tau}");
    documented.lyapunov.pendulum.torque_limit = def_tau;
    assert_eq!(documented, defaults);
}

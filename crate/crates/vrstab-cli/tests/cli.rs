//! End-to-end tests of the binary: exit codes, the `error_code=` contract,
//! override semantics, manifest output, and byte determinism.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vrstab"))
}

fn write(path: &Path, contents: &str) {
    std::fs::write(path, contents).unwrap();
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("process terminated by signal")
}

const TINY_STABILITY: &str = r#"{
  "method": "svrg",
  "source": {"kind": "synthetic", "dimension": 3, "target": [1.0, -0.5, 0.25],
             "noise_sigma": 0.3, "train_n": 20},
  "step_size": 0.1,
  "epochs": 1,
  "replicates": 2,
  "base_seed": 11,
  "checkpoints": 5
}"#;

#[test]
fn stability_happy_path_prints_the_manifest_and_writes_both_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    write(&cfg, TINY_STABILITY);
    let out_dir = dir.path().join("out");
    let out = bin()
        .args(["stability", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let manifest: Vec<String> = stdout(&out).lines().map(str::to_owned).collect();
    assert_eq!(manifest.len(), 2, "manifest: {manifest:?}");
    assert!(manifest[0].ends_with("stability.csv"));
    assert!(manifest[1].ends_with("stability.svg"));
    for path in &manifest {
        assert!(Path::new(path).exists(), "{path} missing");
    }
    let csv = std::fs::read_to_string(&manifest[0]).unwrap();
    assert!(csv.starts_with("epoch,mean_distance,std_distance,mean_sq_distance,bound_sq\n"));
}

#[test]
fn reruns_and_worker_counts_produce_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    write(&cfg, TINY_STABILITY);
    let run = |out_name: &str, workers: &str| {
        let out_dir = dir.path().join(out_name);
        let out = bin()
            .args(["stability", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out_dir)
            .args(["--workers", workers])
            .output()
            .unwrap();
        assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
        (
            std::fs::read(out_dir.join("stability.csv")).unwrap(),
            std::fs::read(out_dir.join("stability.svg")).unwrap(),
        )
    };
    let a = run("a", "1");
    let b = run("b", "3");
    assert_eq!(a, b);

    // The environment variable is an equivalent way to set the worker count.
    let out_dir = dir.path().join("c");
    let out = bin()
        .args(["stability", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .env("VRSTAB_WORKERS", "2")
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 0);
    assert_eq!(std::fs::read(out_dir.join("stability.csv")).unwrap(), a.0);
}

#[test]
fn set_overrides_apply_in_order_with_last_write_winning() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    write(&cfg, TINY_STABILITY);
    // The second --set wins and is invalid: the validator must see −1.
    let out = bin()
        .args(["stability", "--config"])
        .arg(&cfg)
        .args(["--set", "step_size=0.5", "--set", "step_size=-1"])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 1);
    assert!(stderr(&out).contains("step_size must be positive (got -1)"), "{}", stderr(&out));
    assert!(stdout(&out).contains("error_code=1"));

    // Dotted keys reach nested config objects; the effect must show in the
    // output (different training size changes the checkpoint epochs).
    let run_with_n = |name: &str, n: &str| {
        let out_dir = dir.path().join(name);
        let out = bin()
            .args(["stability", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out_dir)
            .args(["--set", &format!("source.train_n={n}")])
            .output()
            .unwrap();
        assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
        std::fs::read(out_dir.join("stability.csv")).unwrap()
    };
    assert_ne!(run_with_n("n16", "16"), run_with_n("n24", "24"));
}

#[test]
fn unknown_config_keys_are_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    write(&cfg, TINY_STABILITY);
    let out = bin()
        .args(["stability", "--config"])
        .arg(&cfg)
        .args(["--set", "stepsize=0.2"])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 1);
    assert!(stderr(&out).contains("unknown field"), "{}", stderr(&out));
    assert!(stdout(&out).contains("error_code=1"));
}

#[test]
fn missing_config_file_is_a_runtime_error() {
    let out = bin().args(["stability", "--config", "/nonexistent/cfg.json"]).output().unwrap();
    assert_eq!(exit_code(&out), 2);
    assert!(stdout(&out).contains("error_code=2"));
}

#[test]
fn missing_dataset_file_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    write(
        &cfg,
        r#"{
          "method": "saga",
          "source": {"kind": "file", "path": "/nonexistent/data.libsvm"},
          "step_size": 0.1,
          "replicates": 2
        }"#,
    );
    let out = bin().args(["stability", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(exit_code(&out), 2, "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("error_code=2"));
}

#[test]
fn optimizer_divergence_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    write(
        &cfg,
        r#"{
          "method": "svrg",
          "loss": "least_squares",
          "source": {"kind": "synthetic", "dimension": 3, "target": [2.0, 1.0, -1.0],
                     "noise_sigma": 0.2, "train_n": 16},
          "preprocessing": "none",
          "step_size": 1e300,
          "epochs": 2,
          "replicates": 1,
          "base_seed": 3,
          "checkpoints": 4
        }"#,
    );
    let out = bin().args(["stability", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(exit_code(&out), 3, "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("error_code=3"));
    assert!(stderr(&out).contains("diverged"), "{}", stderr(&out));
}

#[test]
fn oversized_step_warns_and_disables_the_certificate_but_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    write(&cfg, TINY_STABILITY);
    let out_dir = dir.path().join("out");
    // Unit-norm logistic has α = ¼, so η = 3 violates η ≤ 1/(2α) = 2 while
    // remaining numerically harmless at this scale.
    let out = bin()
        .args(["stability", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .args(["--set", "step_size=3.0"])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("warning:"), "{}", stderr(&out));
    let csv = std::fs::read_to_string(out_dir.join("stability.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().ends_with(",NaN"));
}

#[test]
fn convergence_and_epr_subcommands_run_from_configs() {
    let dir = tempfile::tempdir().unwrap();
    let conv = dir.path().join("conv.json");
    write(
        &conv,
        r#"{
          "method": "saga",
          "loss": "least_squares",
          "source": {"kind": "synthetic", "dimension": 2, "target": [1.0, -1.0],
                     "noise_sigma": 0.2, "train_n": 16},
          "preprocessing": "scale_features",
          "step_size": 0.2,
          "outer_units": 32,
          "replicates": 2,
          "base_seed": 7,
          "checkpoints": 8
        }"#,
    );
    let out_dir = dir.path().join("out");
    let out = bin()
        .args(["convergence", "--config"])
        .arg(&conv)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let csv = std::fs::read_to_string(out_dir.join("convergence.csv")).unwrap();
    assert!(csv.starts_with("outer_step,mean_subopt,std_subopt,bound\n"));

    let epr = dir.path().join("epr.json");
    write(
        &epr,
        r#"{
          "method": "saga",
          "dimension": 2,
          "target": [1.0, -0.5],
          "noise_sigma": 0.4,
          "n_grid": [16, 32],
          "pairs_per_n": 3,
          "base_seed": 5
        }"#,
    );
    let out = bin()
        .args(["epr", "--config"])
        .arg(&epr)
        .arg("--out")
        .arg(&out_dir)
        .args(["--replicates", "2"])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let csv = std::fs::read_to_string(out_dir.join("epr.csv")).unwrap();
    assert!(csv.starts_with("n,mean_epr,std_epr,slope_to_date\n"));
    // --replicates mapped onto pairs_per_n: 2 pairs → sample std defined.
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn select_params_reports_the_regime_rules() {
    let out = bin()
        .args([
            "select-params",
            "--regime",
            "convex",
            "--method",
            "svrg",
            "--n",
            "10000",
            "--initial-risk",
            "1",
            "--alpha",
            "0.25",
        ])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("step_size=0.01"), "{text}");
    assert!(text.contains("inner_length=10000"));
    assert!(text.contains("rounds=1"));

    let out = bin()
        .args([
            "select-params",
            "--regime",
            "strongly-convex",
            "--method",
            "svrg",
            "--n",
            "100",
            "--alpha",
            "1",
            "--mu",
            "0.001",
        ])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 1);
    assert!(stderr(&out).contains("μ·n"), "{}", stderr(&out));
    assert!(stdout(&out).contains("error_code=1"));
}

#[test]
fn parse_data_summarizes_valid_files_and_flags_bad_ones() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.libsvm");
    write(&good, "+1 1:0.5 3:1.25\n-1 2:0.75\n+1 1:1 2:1 3:1\n");
    let out = bin().arg("parse-data").arg(&good).output().unwrap();
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("examples=3 dimension=3 nonzeros=6"), "{}", stdout(&out));

    let bad = dir.path().join("bad.libsvm");
    write(&bad, "+1 1:0.5 1:0.25\n");
    let out = bin().arg("parse-data").arg(&bad).output().unwrap();
    assert_eq!(exit_code(&out), 1);
    assert!(stdout(&out).contains("error_code=1"));

    let out = bin().args(["parse-data", "/nonexistent/x.libsvm"]).output().unwrap();
    assert_eq!(exit_code(&out), 2);
    assert!(stdout(&out).contains("error_code=2"));
}

#[test]
fn check_losses_passes_on_a_small_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.libsvm");
    write(&data, "+1 1:0.6 2:0.8\n-1 1:1.0\n+1 2:0.4 3:0.9\n-1 2:0.5 3:0.5\n");
    let out = bin()
        .args(["check-losses", "--data"])
        .arg(&data)
        .args(["--pairs", "500"])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(text.matches("loss=").count(), 4);
    assert!(!text.contains("FAIL"), "{text}");
}

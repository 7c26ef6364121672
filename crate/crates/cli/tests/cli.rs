use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rssc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rssc")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_model(dir: &Path, sigma: f64, density: f64) -> String {
    let path = dir.join("model.in.json");
    let cfg = serde_json::json!({
        "ambient_dim": 30,
        "subspaces": [
            {"dim": 3, "density": density},
            {"dim": 3, "density": density},
            {"dim": 3, "density": density}
        ],
        "noise_sigma": sigma,
        "orthogonal": true,
        "seed": 11
    });
    fs::write(&path, cfg.to_string()).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn rho_star_prints_constants() {
    let o = rssc(&["asymptotics", "rho-star"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("alpha*=0.925"), "{s}");
    assert!(s.contains("delta*=0.3547"), "{s}");
    assert!(s.contains("rho*=2.818"), "{s}");
}

#[test]
fn eta_moment_at_zero_is_one() {
    let o = rssc(&["asymptotics", "eta-moment", "--alpha", "0"]);
    assert!(o.status.success());
    let v: f64 = stdout(&o).trim().parse().unwrap();
    assert!((v - 1.0).abs() < 1e-12);
}

#[test]
fn unknown_flag_exits_with_usage_code() {
    let o = rssc(&["generate", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_input_reports_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = rssc(&["pipeline", "--data", "/nonexistent/Y.csv", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(o.stderr.trim_ascii()).unwrap();
    assert_eq!(err["error"], "io");
}

#[test]
fn lasso_without_lambda_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), 0.0, 5.0);
    let data = dir.path().join("data");
    assert!(rssc(&["generate", "--config", &model, "--out", data.to_str().unwrap()]).status.success());
    let o = rssc(&["regress", "--data", data.to_str().unwrap(), "--method", "lasso", "--out", dir.path().join("B.csv").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn noiseless_pipeline_recovers_clusters() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), 0.0, 20.0);
    let data = dir.path().join("data");
    let out = dir.path().join("run");
    assert!(rssc(&["generate", "--config", &model, "--out", data.to_str().unwrap()]).status.success());
    let o = rssc(&["pipeline", "--data", data.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["l_hat"], 3);
    assert_eq!(summary["clustering_error"], 0.0);
    assert_eq!(summary["subspace_detection_property"], true);
    assert!(out.join("Xhat.csv").exists());

    // Rerunning into the same directory needs --force.
    let again = rssc(&["pipeline", "--data", data.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(again.status.code(), Some(1));
    let forced = rssc(&["pipeline", "--data", data.to_str().unwrap(), "--out", out.to_str().unwrap(), "--force"]);
    assert!(forced.status.success());
}

#[test]
fn regress_cluster_evaluate_chain() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), 0.0, 20.0);
    let data = dir.path().join("data");
    let b = dir.path().join("B.csv");
    let clusters = dir.path().join("clusters");
    assert!(rssc(&["generate", "--config", &model, "--out", data.to_str().unwrap()]).status.success());
    let r = rssc(&["regress", "--data", data.to_str().unwrap(), "--method", "lasso", "--lambda", "0.05", "--out", b.to_str().unwrap()]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let c = rssc(&["cluster", "--coefficients", b.to_str().unwrap(), "--num-clusters", "3", "--out", clusters.to_str().unwrap()]);
    assert!(c.status.success());
    let e = rssc(&[
        "evaluate",
        "--coefficients",
        b.to_str().unwrap(),
        "--labels",
        data.join("labels.txt").to_str().unwrap(),
        "--predicted",
        clusters.join("labels.txt").to_str().unwrap(),
        "--model",
        data.join("model.json").to_str().unwrap(),
    ]);
    assert!(e.status.success());
    let report: serde_json::Value = serde_json::from_slice(&e.stdout).unwrap();
    assert_eq!(report["clustering_error"], 0.0);
    assert_eq!(report["false_discoveries"], 0);
    assert_eq!(report["mean_fpr"], 0.0);
}

#[test]
fn generate_is_deterministic_and_seed_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), 0.1, 5.0);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    for (out, seed) in [(&a, "3"), (&b, "3"), (&c, "4")] {
        assert!(rssc(&["generate", "--config", &model, "--out", out.to_str().unwrap(), "--seed", seed]).status.success());
    }
    let ya = fs::read(a.join("Y.csv")).unwrap();
    assert_eq!(ya, fs::read(b.join("Y.csv")).unwrap());
    assert_ne!(ya, fs::read(c.join("Y.csv")).unwrap());
}

#[test]
fn roc_outputs_do_not_depend_on_workers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.json");
    let exp = serde_json::json!({
        "name": "small",
        "model": {
            "ambient_dim": 20,
            "subspaces": [{"dim": 2, "density": 5}, {"dim": 3, "density": 5}],
            "noise_sigma": 0.2
        },
        "method": {"kind": "two_step", "sigma": 0.2},
        "grid": [0.5, 1.0, 2.0],
        "seed": 5
    });
    fs::write(&cfg, exp.to_string()).unwrap();
    let one = dir.path().join("one");
    let many = dir.path().join("many");
    for (out, w) in [(&one, "1"), (&many, "4")] {
        let o = rssc(&["roc", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--workers", w, "--svg"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["results.csv", "roc.csv"] {
        assert_eq!(fs::read(one.join(f)).unwrap(), fs::read(many.join(f)).unwrap(), "{f}");
    }
    assert!(one.join("rates.svg").exists());
}

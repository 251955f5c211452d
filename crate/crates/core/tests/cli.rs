use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_itosim"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn write_config(dir: &Path, json: &str) -> PathBuf {
    let p = dir.join("cfg.json");
    std::fs::write(&p, json).unwrap();
    p
}

fn column(path: &Path, idx: usize) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(idx).unwrap().to_string())
        .collect()
}

#[test]
fn simulate_black_scholes_overlays_share_time_axis() {
    let out = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["simulate", "--config"])
        .arg(config("simulate_bs.json"))
        .arg("--out")
        .arg(out.path())
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    let euler = out.path().join("simulate_euler.csv");
    let milstein = out.path().join("simulate_milstein.csv");
    let text = std::fs::read_to_string(&euler).unwrap();
    assert!(text.starts_with("t,state_1\n"));
    assert_eq!(column(&euler, 0), column(&milstein, 0));
    assert_eq!(column(&euler, 0).len(), 1025);
}

#[test]
fn simulate_heston_has_finite_states() {
    let out = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["simulate", "--config"])
        .arg(config("simulate_heston.json"))
        .arg("--out")
        .arg(out.path())
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    let files: Vec<_> = std::fs::read_dir(out.path()).unwrap().collect();
    assert_eq!(files.len(), 6);
    for f in files {
        let text = std::fs::read_to_string(f.unwrap().path()).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,state_1,state_2"));
        for l in lines {
            assert!(l.split(',').all(|v| v.parse::<f64>().unwrap().is_finite()));
        }
    }
}

/// With σ = 0 Milstein reduces to `X_{n+1} = (1 + rΔ) X_n`.
#[test]
fn deterministic_black_scholes_limit() {
    let dir = tempfile::tempdir().unwrap();
    for r in [0.0, 0.5] {
        let cfg = write_config(
            dir.path(),
            &format!(
                r#"{{"model": {{"kind": "black_scholes", "r": {r}, "sigma": 0.0, "x0": 1.5}},
                    "schemes": [{{"kind": "milstein"}}], "grid": {{"base_dt": 0.0009765625}}}}"#
            ),
        );
        let out = dir.path().join("out");
        assert!(bin().arg("simulate").arg("--config").arg(&cfg).arg("--out").arg(&out).output().unwrap().status.success());
        let xs = column(&out.join("simulate_milstein.csv"), 1);
        let last: f64 = xs.last().unwrap().parse().unwrap();
        let expect = 1.5 * (1.0 + r / 1024.0f64).powi(1024);
        assert!((last - expect).abs() <= 1e-9 * expect, "r={r}: {last} vs {expect}");
        if r == 0.0 {
            assert_eq!(last, 1.5);
        }
    }
}

#[test]
fn converge_writes_reports_and_honours_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"model": {"kind": "black_scholes", "r": 2.0, "sigma": 1.0, "x0": 1.0},
            "schemes": [{"kind": "euler"}, {"kind": "milstein"}],
            "grid": {"base_dt": 0.0625},
            "study": {"levels": 3, "replicates": 50}}"#,
    );
    let run = |seed: &str, out: &str, extra: &[&str]| {
        let out = dir.path().join(out);
        let st = bin()
            .args(["converge", "--seed", seed, "--workers", "2", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .args(extra)
            .output()
            .unwrap()
            .status;
        assert!(st.success());
        out
    };
    let a = run("1", "a", &[]);
    let b = run("1", "b", &[]);
    let c = run("2", "c", &[]);
    let summary = |p: &Path| std::fs::read_to_string(p.join("summary.csv")).unwrap();
    assert_eq!(summary(&a), summary(&b));
    assert_ne!(summary(&a), summary(&c));
    assert!(summary(&a).starts_with("scheme,gamma,logC,r2,divergent\n"));
    let fit = std::fs::read_to_string(a.join("euler_fit.csv")).unwrap();
    assert!(fit.starts_with("slope,intercept,r2,divergent_count\n"));
    assert_eq!(column(&a.join("milstein_errors.csv"), 0).len(), 3);
    let truth = run("1", "t", &["--mode", "truth", "--metric", "mse"]);
    assert_ne!(summary(&truth), summary(&a));
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"grid": {"base_dt": "fast"}}"#);
    let out = bin().arg("converge").arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("grid.base_dt"), "{msg}");
    let missing = bin().args(["simulate", "--config", "/nonexistent.json"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn zero_model_reports_degenerate_fit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"model": {"kind": "black_scholes", "r": 0.0, "sigma": 0.0, "x0": 1.0},
            "schemes": [{"kind": "euler"}], "grid": {"base_dt": 0.25},
            "study": {"levels": 3, "replicates": 30}}"#,
    );
    let out = bin().arg("converge").arg("--config").arg(&cfg).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("degenerate"));
    let errors = column(&dir.path().join("o/euler_errors.csv"), 1);
    assert!(errors.iter().all(|e| e.parse::<f64>().unwrap() == 0.0));
}

#[test]
fn divergence_exits_with_code_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"model": {"kind": "black_scholes", "r": 100000.0, "sigma": 1.0, "x0": 1.0},
            "schemes": [{"kind": "euler"}], "grid": {"base_dt": 0.03125},
            "study": {"levels": 6, "replicates": 30}}"#,
    );
    let out = bin().arg("converge").arg("--config").arg(&cfg).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn integrals_command_writes_enabled_experiments() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"integrals": {"pairing": {"dt": 0.0625, "intervals": 2, "paths": 40, "max_power": 3},
                          "fourier": {"dt": 0.0625, "paths": 40, "truncations": [2, 4], "reference_terms": 64}}}"#,
    );
    let out = dir.path().join("o");
    assert!(bin().arg("integrals").arg("--config").arg(&cfg).arg("--out").arg(&out).output().unwrap().status.success());
    assert!(std::fs::read_to_string(out.join("pairing.csv")).unwrap().starts_with("method,interval,n_k,mean_abs_error\n"));
    assert!(std::fs::read_to_string(out.join("fourier.csv")).unwrap().starts_with("p,mse,expected_mse\n"));
    assert!(!out.join("mse.csv").exists());
}

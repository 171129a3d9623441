//! End-to-end tests of the command-line binary: flag parsing, file output,
//! config handling and exit codes.

use std::process::Command;

fn levydd() -> Command {
    Command::new(env!("CARGO_BIN_EXE_levydd"))
}

#[test]
fn scale_fn_brownian_point() {
    let out = levydd()
        .args([
            "scale-fn", "--model", "bm", "--mu", "0", "--sigma2", "1", "--q", "0", "--x", "1",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "x,q,W,W_prime_plus,Z");
    let row = lines.next().unwrap();
    assert_eq!(row, "1,0,2,2,1");
}

#[test]
fn scale_fn_stable_matches_closed_form() {
    let out = levydd()
        .args([
            "scale-fn", "--model", "stable", "--alpha", "1.5", "--sigma", "1", "--q", "0", "--x", "4",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let w: f64 = text.lines().nth(1).unwrap().split(',').nth(2).unwrap().parse().unwrap();
    assert!((w - 2.256_758_334_191_025).abs() < 1e-10);
}

#[test]
fn scale_fn_backend_comparison_column() {
    let out = levydd()
        .args([
            "scale-fn", "--model", "bm", "--mu", "0.3", "--sigma2", "1.2", "--q", "0.5",
            "--x-min", "0.2", "--x-max", "1.4", "--points", "4",
            "--backend", "inversion", "--compare-backend", "closed",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "x,q,W,W_prime_plus,Z,W_compare,diff");
    for row in lines {
        let diff: f64 = row.split(',').nth(6).unwrap().parse().unwrap();
        let w: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
        assert!(diff.abs() < 1e-6 * w.abs().max(1.0), "diff column too large: {row}");
    }
}

#[test]
fn risk_symmetric_brownian_json() {
    let out = levydd()
        .args([
            "risk", "dd-before-rally", "--alpha", "0.2", "--beta", "0.25", "--horizon", "inf",
            "--model", "bm", "--mu", "0", "--sigma2", "1",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let value = v[0]["value"].as_f64().unwrap();
    assert!((value - 0.5).abs() < 1e-10, "expected 1/2, got {value}");
    assert_eq!(v[0]["quantity"], "prob_dd_before_rally");
}

#[test]
fn risk_carr_wu_symmetric_matches_generic() {
    let sym = levydd()
        .args([
            "risk", "carr-wu-sym", "--alpha", "0.3",
            "--model", "stable-drift", "--mu", "0.1", "--sigma", "0.3", "--stable-alpha", "1.5",
            "--format", "csv",
        ])
        .output()
        .unwrap();
    assert!(sym.status.success());
    let text = String::from_utf8(sym.stdout).unwrap();
    let value: f64 = text.lines().nth(1).unwrap().split(',').nth(4).unwrap().parse().unwrap();

    let beta = 0.3 / 0.7f64;
    let gen = levydd()
        .args([
            "risk", "dd-before-rally", "--alpha", "0.3", "--beta", &beta.to_string(),
            "--horizon", "inf",
            "--model", "stable-drift", "--mu", "0.1", "--sigma", "0.3", "--stable-alpha", "1.5",
            "--format", "csv",
        ])
        .output()
        .unwrap();
    assert!(gen.status.success());
    let gtext = String::from_utf8(gen.stdout).unwrap();
    let gvalue: f64 = gtext.lines().nth(1).unwrap().split(',').nth(4).unwrap().parse().unwrap();
    assert!(
        ((value - gvalue) / gvalue).abs() < 1e-6,
        "closed form {value} vs generic {gvalue}"
    );
}

#[test]
fn risk_expected_dd_with_mc_validation() {
    let out = levydd()
        .args([
            "risk", "expected-dd", "--alpha", "0.1", "--horizon", "1",
            "--model", "bm", "--mu", "0.05", "--sigma2", "0.04", "--s0", "100",
            "--validate", "--mc-paths", "60000", "--mc-dt", "0.002",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 2);
    let analytic = v[0]["value"].as_f64().unwrap();
    let mc = v[1]["value"].as_f64().unwrap();
    let se = v[1]["error_estimate"].as_f64().unwrap();
    assert_eq!(v[1]["method"], "simulation");
    assert!(analytic > 0.0);
    assert!((analytic - mc).abs() < 5.0 * se + 0.01 * analytic);
}

#[test]
fn risk_from_config_file() {
    let dir = std::env::temp_dir().join(format!("levydd-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg_path = dir.join("run.toml");
    std::fs::write(
        &cfg_path,
        r#"
[model]
family = "bm"
mu = 0.0
sigma2 = 1.0

[[queries]]
kind = "new-min"
alpha = 0.3
horizon = "inf"

[output]
format = "json"
"#,
    )
    .unwrap();
    let out_path = dir.join("reports.json");
    let out = levydd()
        .args([
            "risk", "--config", cfg_path.to_str().unwrap(), "--out", out_path.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&out_path).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!((v[0]["value"].as_f64().unwrap() - 0.5).abs() < 1e-9);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn exit_codes() {
    // Config error: unknown family.
    let out = levydd()
        .args(["scale-fn", "--model", "weird", "--q", "0", "--x", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // Validation subset passes with exit 0, mutated run fails with exit 1.
    let ok = levydd().args(["validate", "--only", "8"]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stdout));
    let text = String::from_utf8(ok.stdout).unwrap();
    assert!(text.contains("criterion  8 [PASS]"));

    let bad = levydd()
        .args(["validate", "--only", "8", "--mutate"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8(bad.stdout).unwrap().contains("[FAIL]"));

    // Numerical failure surfaces as exit 3: expected drawdown needs a
    // finite horizon, which is a configuration error (exit 2).
    let cfg_err = levydd()
        .args([
            "risk", "expected-dd", "--alpha", "0.1", "--horizon", "0",
            "--model", "bm", "--mu", "0", "--sigma2", "1",
        ])
        .output()
        .unwrap();
    assert_eq!(cfg_err.status.code(), Some(2));
}

#[test]
fn validate_quick_subset_is_fast_enough() {
    let start = std::time::Instant::now();
    let out = levydd().args(["validate", "--quick"]).output().unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(elapsed < 60.0, "quick validation took {elapsed:.1}s");
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().filter(|l| l.contains("[PASS]")).count() >= 8);
}

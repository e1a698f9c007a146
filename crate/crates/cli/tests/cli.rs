use std::path::PathBuf;
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn dte(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dte"))
        .args(args)
        .env_remove("DTE_BUDGET")
        .env_remove("DTE_SIGNATURE_BUDGET")
        .output()
        .expect("spawn dte")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn validate_accepts_every_fixture() {
    for f in [
        "case_study_1.json",
        "case_study_2.json",
        "experiment_episodes.json",
        "example_1.json",
        "example_2.json",
        "example_3.json",
    ] {
        let path = scenario(f);
        let out = stdout(&dte(&["validate", path.to_str().unwrap()]));
        assert!(out.contains("ok (digest"), "{f}: {out}");
    }
}

#[test]
fn invalid_scenario_fails_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"name": "x", "horizon": "eight"}"#).unwrap();
    let o = dte(&["validate", bad.to_str().unwrap()]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.starts_with("error:"), "{err}");
    assert!(err.contains("horizon") || err.contains("line"), "{err}");

    let missing = dir.path().join("nope.json");
    let o = dte(&["validate", missing.to_str().unwrap()]);
    assert!(!o.status.success());
}

#[test]
fn actions_prints_sizes() {
    let path = scenario("experiment_episodes.json");
    let out = stdout(&dte(&["actions", path.to_str().unwrap(), "--variant", "episode_1"]));
    for n in [8, 6] {
        assert!(out.contains(&format!("|A| = {n}")), "{out}");
    }
}

#[test]
fn analyze_finds_example_3_equilibria() {
    let path = scenario("example_3.json");
    let out = stdout(&dte(&["analyze", path.to_str().unwrap(), "--nash"]));
    assert!(out.contains("3 pure Nash equilibria"), "{out}");
    let json = stdout(&dte(&["analyze", path.to_str().unwrap(), "--optimum", "--json"]));
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["optimum"]["value"], 10);
}

#[test]
fn plan_output_is_reproducible() {
    let path = scenario("experiment_episodes.json");
    let dir = tempfile::tempdir().unwrap();
    let mut csv = Vec::new();
    for k in ["a", "b"] {
        let out = dir.path().join(k);
        let args = [
            "plan",
            path.to_str().unwrap(),
            "--variant",
            "episode_3",
            "--rounds",
            "40",
            "--runs",
            "3",
            "--seed",
            "9",
            "--out",
            out.to_str().unwrap(),
        ];
        stdout(&dte(&args));
        csv.push(std::fs::read(out.join("series.csv")).unwrap());
        assert!(out.join("report.json").exists());
    }
    assert_eq!(csv[0], csv[1]);
    assert!(String::from_utf8_lossy(&csv[0]).starts_with("round,min,avg,max\n"));
}

#[test]
fn batch_writes_one_directory_per_variant() {
    let path = scenario("experiment_episodes.json");
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "batch",
        path.to_str().unwrap(),
        "--algorithm",
        "br",
        "--rounds",
        "20",
        "--runs",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
    ];
    let out = stdout(&dte(&args));
    for v in 1..=5 {
        assert!(dir.path().join(format!("episode_{v}")).join("histogram.csv").exists());
        assert!(out.contains(&format!("variant episode_{v}:")), "{out}");
    }
}

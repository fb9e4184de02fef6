use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_collsym"))
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("collsym-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn without_timestamp(json: &str) -> String {
    json.lines().filter(|l| !l.trim_start().starts_with("\"generated_at\"")).collect::<Vec<_>>().join("\n")
}

#[test]
fn analyze_is_deterministic() {
    let spec = fixtures().join("kepler_noether.toml");
    let outs: Vec<String> = (0..2)
        .map(|k| {
            let out = scratch(&format!("det{k}.json"));
            let o = run(&["--seed", "99", "analyze", spec.to_str().unwrap(), "--out", out.to_str().unwrap()]);
            assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
            std::fs::read_to_string(out).unwrap()
        })
        .collect();
    assert!(outs[0].contains("\"generated_at\""));
    assert_eq!(without_timestamp(&outs[0]), without_timestamp(&outs[1]));
    assert!(outs[0].contains("\"seed\": 99"));
}

#[test]
fn every_fixture_passes_quickly() {
    let mut seen = 0;
    for entry in std::fs::read_dir(fixtures()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("toml") {
            continue;
        }
        let start = Instant::now();
        let o = run(&["analyze", path.to_str().unwrap(), "--out", scratch("fixture.json").to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}: {}", path.display(), String::from_utf8_lossy(&o.stderr));
        assert!(start.elapsed() < Duration::from_secs(30), "{} took {:?}", path.display(), start.elapsed());
        seen += 1;
    }
    assert!(seen >= 8);
}

#[test]
fn input_errors_exit_2() {
    assert_eq!(run(&["analyze", "/nonexistent/spec.toml"]).status.code(), Some(2));
    let bad = scratch("both.toml");
    std::fs::write(
        &bad,
        "[space]\ndimension = 1\n[potential]\nfamily = \"quadratic\"\n[omega]\nfamily = \"power_law\"\na = 1.0\n[damping]\nfamily = \"constant\"\nc = 1.0\ninterval = [1.0, 2.0]\n",
    )
    .unwrap();
    let o = run(&["analyze", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("exactly one"));
    let broken = scratch("broken.toml");
    std::fs::write(&broken, "[space\n").unwrap();
    let o = run(&["analyze", broken.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn impossible_tolerance_exits_1() {
    let spec = fixtures().join("kepler_t.toml");
    let o = run(&["--tol", "1e-30", "analyze", spec.to_str().unwrap(), "--out", scratch("strict.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn verify_reruns_report() {
    let report = scratch("verify.json");
    let spec = fixtures().join("oscillator_1d.toml");
    assert_eq!(run(&["analyze", spec.to_str().unwrap(), "--out", report.to_str().unwrap()]).status.code(), Some(0));
    assert_eq!(run(&["verify", report.to_str().unwrap()]).status.code(), Some(0));

    // a report claiming a different symmetry set no longer verifies
    let text = std::fs::read_to_string(&report).unwrap().replacen("\"label\": \"I.2[A1]\"", "\"label\": \"I.1\"", 1);
    let tampered = scratch("tampered.json");
    std::fs::write(&tampered, text).unwrap();
    assert_eq!(run(&["verify", tampered.to_str().unwrap()]).status.code(), Some(1));

    std::fs::write(&tampered, "{ not json").unwrap();
    assert_eq!(run(&["verify", tampered.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn reparam_writes_time_map() {
    let csv_path = scratch("map.csv");
    let spec = fixtures().join("damped_oscillator.toml");
    let report = scratch("reparam.json");
    let o = run(&["reparam", spec.to_str().unwrap(), "--out", csv_path.to_str().unwrap(), "--report", report.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&csv_path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,S,omega"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 201);
    for r in &rows {
        // φ = −½ from t₀ = 1: S = 1 + 2(e^{(t−1)/2} − 1), ω = 4/(S + 1)²
        let s = 1.0 + 2.0 * (((r[0] - 1.0) / 2.0).exp() - 1.0);
        assert!((r[1] - s).abs() < 1e-10 * s, "{r:?}");
        assert!((r[2] - 4.0 / (s + 1.0).powi(2)).abs() < 1e-10, "{r:?}");
    }
    let json = std::fs::read_to_string(report).unwrap();
    assert!(json.contains("\"direction\": \"damped_to_timedep\""));
}

use std::path::Path;
use std::process::{Command, Output};

use dslt_core::cli::{read_artifact, Command as Cmd, Format};

fn dslt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dslt")).args(args).output().unwrap()
}

fn code(args: &[&str]) -> i32 {
    dslt(args).status.code().unwrap()
}

fn run_to(dir: &Path, name: &str, args: &[&str]) -> std::path::PathBuf {
    let out = dir.join(name);
    let mut full: Vec<&str> = args.to_vec();
    let s = out.to_str().unwrap().to_string();
    full.extend(["--out", &s]);
    let o = dslt(&full);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn simulate_writes_nine_rows_from_zero() {
    let dir = tempfile::tempdir().unwrap();
    let f = run_to(
        dir.path(),
        "sim.csv",
        &["simulate", "--hurst", "0.5", "--steps", "8", "--t", "1", "--seed", "7", "--method", "cholesky"],
    );
    let a = read_artifact(&f).unwrap();
    assert_eq!(a.spec.command, Cmd::Simulate);
    assert_eq!(a.spec.params.seed, Some(7));
    let v = a.column_f64("value").unwrap();
    assert_eq!(v.len(), 9);
    assert_eq!(v[0], 0.0);
    let text = std::fs::read_to_string(&f).unwrap();
    assert!(text.starts_with("# dslt "));
}

#[test]
fn every_subcommand_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cases: Vec<(&str, Vec<&str>, &str)> = vec![
        ("simulate", vec!["--hurst", "0.7", "--steps", "16", "--paths", "2"], "value"),
        ("dslt", vec!["--hurst", "0.5", "--eps", "0.1", "--y", "0.5", "--steps", "32", "--paths", "20"], "mean"),
        ("tanaka", vec!["--hurst", "0.5", "--eps", "0.05", "--steps", "64", "--paths", "10"], "rms"),
        ("moment2", vec!["--hurst", "0.5", "--eps", "0.05"], "value"),
        ("chaos", vec!["--hurst", "0.5", "--mmax", "8", "--tol", "1e-4"], "norm_sq"),
        ("bounds", vec!["--case", "i", "--hurst", "0.3", "--samples", "1000"], "min_ratio"),
    ];
    for (i, (cmd, args, col)) in cases.iter().enumerate() {
        for fmt in ["csv", "json"] {
            let mut full = vec![*cmd];
            full.extend(args.iter().copied());
            full.extend(["--format", fmt]);
            let f = run_to(dir.path(), &format!("{i}.{fmt}"), &full);
            let a = read_artifact(&f).unwrap();
            assert_eq!(a.spec.output.format, if fmt == "csv" { Format::Csv } else { Format::Json });
            assert_eq!(a.spec.output.path.as_deref(), Some(f.as_path()));
            assert!(a.columns.iter().any(|c| c == col), "{cmd}: {:?}", a.columns);
            assert!(!a.rows.is_empty());
        }
    }
}

#[test]
fn counterexample_ratios() {
    let dir = tempfile::tempdir().unwrap();
    let f = run_to(
        dir.path(),
        "b.csv",
        &["bounds", "--case", "ii-counterexample", "--hurst", "0.5", "--b", "1", "--deltas", "0.01,0.001"],
    );
    let r = read_artifact(&f).unwrap().column_f64("ratio").unwrap();
    assert!((r[0] - 0.0196).abs() < 1e-4);
    assert!((r[1] - 0.001996).abs() < 1e-6);
}

#[test]
fn exit_codes_per_subcommand() {
    // usage errors
    assert_eq!(code(&["simulate", "--hurst", "1.0", "--steps", "8"]), 2);
    assert_eq!(code(&["simulate", "--steps", "1", "--hurst", "0.5"]), 2);
    assert_eq!(code(&["dslt", "--hurst", "0.5", "--eps", "0", "--steps", "8", "--paths", "4"]), 2);
    assert_eq!(code(&["tanaka", "--hurst", "0.3", "--eps", "0.1", "--steps", "8", "--paths", "4"]), 2);
    assert_eq!(code(&["moment2", "--hurst", "0.5", "--eps", "-1"]), 2);
    assert_eq!(code(&["chaos", "--hurst", "0.7", "--mmax", "3"]), 2);
    assert_eq!(code(&["bounds", "--case", "iv", "--hurst", "0.5"]), 2);
    assert_eq!(code(&["bounds", "--hurst", "0.5", "--case", "i", "--mmax", "2"]), 2);
    assert_eq!(code(&["nonsense"]), 2);
    // numerical failure: tolerance beyond reach
    assert_eq!(code(&["chaos", "--hurst", "0.6", "--mmax", "3", "--tol", "1e-300"]), 1);
    // success
    assert_eq!(code(&["bounds", "--case", "lnd", "--hurst", "0.3", "--samples", "100"]), 0);
    assert_eq!(code(&["moment2", "--hurst", "0.3", "--eps", "0.1"]), 0);
    let o = dslt(&["dslt", "--hurst", "0.5", "--eps", "0"]);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("mollifier scale must be positive"), "{err}");
}

#[test]
fn batch_runs_each_line() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.json");
    let batch = dir.path().join("batch.jsonl");
    let lines = format!(
        "{}\n\n{}\n",
        serde_json::json!({"command": "simulate", "params": {"hurst": 0.4, "steps": 8}, "output": {"path": a, "format": "csv"}}),
        serde_json::json!({"command": "bounds", "params": {"hurst": 0.5, "case": "iii", "samples": 100}, "output": {"path": b, "format": "json"}}),
    );
    std::fs::write(&batch, lines).unwrap();
    assert_eq!(code(&["batch", "--file", batch.to_str().unwrap()]), 0);
    assert_eq!(read_artifact(&a).unwrap().rows.len(), 9);
    let r = read_artifact(&b).unwrap().column_f64("min_ratio").unwrap();
    assert_eq!(r[0], 1.0);

    std::fs::write(&batch, "{\"command\": \"chaos\", \"params\": {\"hurst\": 0.9}}\n").unwrap();
    assert_eq!(code(&["batch", "--file", batch.to_str().unwrap()]), 2);
}

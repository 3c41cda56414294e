#![allow(clippy::approx_constant)]

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn qsample(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qsample"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines
        .map(|l| l.split(',').map(|f| f.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn missing_sigma_is_a_usage_error() {
    let o = qsample(&["eigensys", "--kernel", "sinc1d"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("--sigma"));
}

#[test]
fn invalid_numeric_arguments_are_usage_errors() {
    for args in [
        &["eigensys", "--kernel", "sinc1d", "--sigma", "3", "--nodes", "1"][..],
        &["eigensys", "--kernel", "sinc1d", "--sigma", "-1"],
        &["eigensys", "--kernel", "sinc1d", "--sigma", "3", "--tau", "0"],
        &["eigensys", "--kernel", "sinc1d", "--sigma", "3", "--floor", "2"],
        &["eigensys", "--kernel", "nope", "--sigma", "3"],
        &["verify", "--tol", "missing-equals"],
    ] {
        let o = qsample(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn eigensys_writes_spectrum_and_eigenfunctions() {
    let dir = TempDir::new().unwrap();
    let spectrum = dir.path().join("spectrum.json");
    let grid = dir.path().join("grid.csv");
    let sigma = 3.14159;
    let o = qsample(&[
        "eigensys", "--kernel", "sinc1d", "--sigma", "3.14159", "--tau", "1", "--nodes", "64",
        "--out", path_str(&spectrum), "--dump-eigenfunctions", path_str(&grid),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("mu_1") && stdout.contains("trace identity"), "{stdout}");

    let records: Vec<Value> = serde_json::from_str(&fs::read_to_string(&spectrum).unwrap()).unwrap();
    let mu: Vec<f64> = records.iter().map(|r| r["mu"].as_f64().unwrap()).collect();
    assert_eq!(mu.len(), 9);
    assert!(mu.windows(2).all(|p| p[0] >= p[1] * (1.0 - 1e-12)));
    // trace of the sinc kernel over [-tau, tau] is 2 sigma tau / pi
    let total: f64 = mu.iter().sum();
    assert!((total - 2.0 * sigma / PI).abs() < 1e-10, "{total}");
    for r in &records {
        assert_eq!(r["lambda"].as_array().unwrap().len(), 4);
        assert!(r["residual"].as_f64().unwrap() < 1e-8);
    }

    let (header, rows) = read_csv(&grid);
    assert_eq!(header, ["node_index", "x1", "n", "w", "x", "y", "z"]);
    assert_eq!(rows.len(), 64 * mu.len());
}

#[test]
fn qft2d_tensor_spectrum_has_trace_four() {
    let o = qsample(&["eigensys", "--kernel", "qft2d", "--sigma", "1", "--floor", "0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let records: Vec<Value> = serde_json::from_slice(&o.stdout).unwrap();
    let total: f64 = records.iter().map(|r| r["mu"].as_f64().unwrap()).sum();
    assert!((total - 4.0).abs() < 4e-10, "{total}");
}

#[test]
fn sampled_lattice_is_reproduced_by_wsk() {
    let dir = TempDir::new().unwrap();
    let samples = dir.path().join("samples.csv");
    let recon = dir.path().join("recon.csv");
    let kernel = ["--kernel", "sinc1d", "--sigma", "3.141592653589793"];
    let mut args = vec!["sample"];
    args.extend(kernel);
    args.extend(["--n-max", "8", "--seed", "3", "--out", path_str(&samples)]);
    let o = qsample(&args);
    assert!(o.status.success(), "{}", stderr(&o));

    let mut args = vec!["reconstruct"];
    args.extend(kernel);
    args.extend([
        "--in", path_str(&samples), "--method", "wsk", "--eval-points", path_str(&samples), "--out", path_str(&recon),
    ]);
    let o = qsample(&args);
    assert!(o.status.success(), "{}", stderr(&o));

    let (h_in, input) = read_csv(&samples);
    let (h_out, output) = read_csv(&recon);
    assert_eq!(h_in, h_out);
    assert_eq!(input.len(), 17);
    let scale = input.iter().flat_map(|r| r[1..].iter()).fold(0.0f64, |m, v| m.max(v.abs()));
    for (a, b) in input.iter().zip(&output) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= 1e-12 * scale, "{a:?} vs {b:?}");
        }
    }
}

#[test]
fn psqws_reconstruction_tracks_the_exact_signal() {
    let dir = TempDir::new().unwrap();
    let samples = dir.path().join("samples.csv");
    let points = dir.path().join("points.csv");
    let exact = dir.path().join("exact.csv");
    let recon = dir.path().join("recon.csv");
    let pts: String = (0..11).map(|i| format!("{}\n", -0.9 + 0.18 * i as f64)).collect();
    fs::write(&points, format!("x1\n{pts}")).unwrap();
    let kernel = ["--kernel", "sinc1d", "--sigma", "3.141592653589793"];
    let mut args = vec!["sample"];
    args.extend(kernel);
    args.extend([
        "--n-max", "32", "--out", path_str(&samples), "--eval-points", path_str(&points), "--exact-out", path_str(&exact),
    ]);
    assert!(qsample(&args).status.success());
    let mut args = vec!["reconstruct"];
    args.extend(kernel);
    args.extend([
        "--in", path_str(&samples), "--method", "psqws", "--eval-points", path_str(&points), "--out", path_str(&recon),
    ]);
    let o = qsample(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let (_, want) = read_csv(&exact);
    let (_, got) = read_csv(&recon);
    let (mut num, mut den) = (0.0, 0.0);
    for (a, b) in got.iter().zip(&want) {
        for c in 1..5 {
            num += (a[c] - b[c]).powi(2);
            den += b[c].powi(2);
        }
    }
    assert!((num / den).sqrt() < 1e-2, "{}", (num / den).sqrt());
}

#[test]
fn malformed_csv_reports_the_row() {
    let dir = TempDir::new().unwrap();
    let samples = dir.path().join("bad.csv");
    fs::write(&samples, "x1,w,x,y,z\n0,1,0,0,0\n1,abc,0,0,0\n").unwrap();
    let o = qsample(&[
        "reconstruct", "--kernel", "sinc1d", "--sigma", "3", "--in", path_str(&samples), "--method", "wsk",
        "--eval-points", path_str(&samples),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let err = stderr(&o);
    assert!(err.contains("row 3") && err.contains("bad.csv"), "{err}");
}

#[test]
fn missing_input_file_is_an_input_error() {
    let o = qsample(&[
        "reconstruct", "--kernel", "sinc1d", "--sigma", "3", "--in", "/nonexistent/s.csv", "--method", "wsk",
        "--eval-points", "/nonexistent/p.csv",
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

/// A 1D table `E(w, x) = 1 + w + 0.3 x`, which is not symmetric.
fn broken_table(dir: &Path) -> std::path::PathBuf {
    let axis: Vec<f64> = (0..21).map(|i| -1.0 + 0.1 * i as f64).collect();
    let mut csv = String::from("w1,x1,w,x,y,z\n");
    for &w in &axis {
        for &x in &axis {
            csv.push_str(&format!("{w},{x},{},{},0,0\n", 1.0 + w, 0.3 * x));
        }
    }
    let path = dir.join("broken.csv");
    fs::write(&path, csv).unwrap();
    path
}

#[test]
fn broken_kernel_fails_verification_naming_condition_one() {
    let dir = TempDir::new().unwrap();
    let table = broken_table(dir.path());
    let report = dir.path().join("report.json");
    let o = qsample(&["verify", "--kernel", "tabulated", "--table", path_str(&table), "--report", path_str(&report)]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("condition-1"), "{}", stderr(&o));
    let r: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["passed"], Value::Bool(false));

    let o = qsample(&["admissibility", "--kernel", "tabulated", "--table", path_str(&table)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("condition-1"));
}

#[test]
fn admissibility_passes_for_builtins() {
    for kernel in ["sinc1d", "qft2d"] {
        let o = qsample(&["admissibility", "--kernel", kernel, "--sigma", "2"]);
        assert!(o.status.success(), "{kernel}: {}", stderr(&o));
        let r: Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(r["checks"].as_array().unwrap().len(), 4);
    }
}

#[test]
fn concentrate_respects_the_bound() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("c.json");
    let o = qsample(&["concentrate", "--kernel", "sinc1d", "--sigma", "3.141592653589793", "--trials", "1000", "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("mu_1") && !stdout.contains("FAIL"), "{stdout}");
    let r: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let mu1 = r["mu_1"].as_f64().unwrap();
    assert!(r["beta_estimate"].as_f64().unwrap() <= mu1 * (1.0 + 1e-8));
    assert_eq!(r["extremizer_passed"], Value::Bool(true));
}

#[test]
fn tolerance_override_can_force_a_failure() {
    let o = qsample(&["verify", "--kernel", "sinc1d", "--sigma", "3.141592653589793", "--trials", "10", "--tol", "algebra.associativity=0"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("associativity"));
}

#[test]
fn default_verify_passes_and_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let (oa, ob) = std::thread::scope(|s| {
        let ta = s.spawn(|| qsample(&["verify", "--seed", "7", "--report", path_str(&a)]));
        let tb = s.spawn(|| qsample(&["verify", "--seed", "7", "--report", path_str(&b)]));
        (ta.join().unwrap(), tb.join().unwrap())
    });
    assert!(oa.status.success(), "{}", stderr(&oa));
    assert!(ob.status.success(), "{}", stderr(&ob));
    let ra = fs::read(&a).unwrap();
    assert_eq!(ra, fs::read(&b).unwrap());
    let r: Value = serde_json::from_slice(&ra).unwrap();
    assert_eq!(r["passed"], Value::Bool(true));
    assert_eq!(r["seed"], 7);
}

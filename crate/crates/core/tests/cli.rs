//! End-to-end checks of the `minnorm` binary.

use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn minnorm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_minnorm"))
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Drops the leading `# config:` line of a CSV output.
fn csv_body(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn diagnose_flat_reports_k_star_and_rho() {
    let o = minnorm(&["diagnose", "--flat", "1000", "--n", "10", "--beta-norm", "1", "--xi-norm", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["report"]["k_star"], 1);
    assert_eq!(v["report"]["r_kstar"].as_f64(), Some(1000.0));
    let rho = v["report"]["rho"].as_f64().unwrap();
    assert!((rho - (1.0 + 8.0 / 1000f64.sqrt())).abs() < 1e-12);
    assert!((rho - 1.25298).abs() < 1e-5);
}

#[test]
fn diagnose_exp_floor_keeps_k_star_below_n() {
    let o = minnorm(&["diagnose", "--exp-floor", "300", "20", "1e-4", "--n", "100", "--c0", "0.2", "--xi-norm", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let k = v["report"]["k_star"].as_u64().unwrap();
    assert!(k <= 100, "k* = {k}");
}

#[test]
fn diagnose_fast_decay_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.txt");
    fs::write(&path, "1\n1e-3\n1e-6\n1e-9\n").unwrap();
    let o = minnorm(&["diagnose", "--spectrum-file", path.to_str().unwrap(), "--n", "2", "--xi-norm", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("k* infinite"), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["report"]["k_star"], "inf");
}

#[test]
fn missing_spectrum_is_a_usage_error() {
    for sub in ["diagnose", "simulate", "certify"] {
        let o = minnorm(&[sub, "--n", "5"]);
        assert_eq!(o.status.code(), Some(1), "{sub}");
        assert!(stderr(&o).contains("missing spectrum"), "{sub}: {}", stderr(&o));
    }
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    fs::write(&path, r#"{"schema": 1, "spectrum": {"kind": "flat", "p": 50, "value": 1.0}, "n": 5, "trails": 3}"#).unwrap();
    let o = minnorm(&["simulate", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("trails"), "{}", stderr(&o));
}

#[test]
fn scan_with_zero_noise_exits_one() {
    let o = minnorm(&["scan", "--flat", "300", "--n", "20", "--noise", "zero", "--snr-grid", "1:2:2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("SNR undefined for zero noise"), "{}", stderr(&o));
}

#[test]
fn bracketing_scan_reads_low_then_high() {
    let dir = tempfile::tempdir().unwrap();
    let stem = dir.path().join("scan");
    // Threshold 1/r_{k*} = 1/300 for flat p = 300.
    let o = minnorm(&[
        "scan", "--flat", "300", "--n", "20", "--c0", "1", "--trials", "4", "--snr-grid", "3e-5:0.3:2",
        "--format", "csv", "--out", stem.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let scan = fs::read_to_string(dir.path().join("scan.csv")).unwrap();
    assert!(scan.starts_with("# config: {"));
    let body = csv_body(&scan).join("\n");
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let headers = rdr.headers().unwrap().clone();
    let regime = headers.iter().position(|h| h == "regime").unwrap();
    assert!(headers.iter().any(|h| h == "threshold_kstar"));
    assert!(headers.iter().any(|h| h == "threshold_cn"));
    let labels: Vec<String> = rdr.records().map(|r| r.unwrap()[regime].to_string()).collect();
    assert_eq!(labels, ["LowSNR", "HighSNR"]);

    let plot = fs::read_to_string(dir.path().join("scan.plot.csv")).unwrap();
    let header = csv_body(&plot)[0].split(',').collect::<Vec<_>>();
    for col in ["snr", "median_pred", "corollary_upper", "corollary_lower"] {
        assert!(header.contains(&col), "{col} missing from {header:?}");
    }
    let trials = fs::read_to_string(dir.path().join("scan.trials.csv")).unwrap();
    assert!(csv_body(&trials)[0].starts_with("snr,regime,trial_index,"));
    assert_eq!(csv_body(&trials).len(), 1 + 2 * 4);
}

#[test]
fn certify_flat_passes_everywhere() {
    let o = minnorm(&["certify", "--flat", "2000", "--n", "20", "--trials", "200"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    // Without --out the JSON owns stdout and the summary line goes to stderr.
    assert!(stderr(&o).contains("pass_rate=1.0000"), "{}", stderr(&o));
}

#[test]
fn certify_one_dimensional_half_normal() {
    let dir = tempfile::tempdir().unwrap();
    let stem = dir.path().join("cert");
    let o = minnorm(&[
        "certify", "--flat", "1", "--n", "1", "--c0", "1", "--allow-low-dim", "--trials", "1000",
        "--format", "both", "--out", stem.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let line = stdout(&o);
    let rate: f64 = line
        .split_whitespace()
        .find_map(|t| t.strip_prefix("pass_rate="))
        .and_then(|t| t.parse().ok())
        .unwrap_or_else(|| panic!("no pass_rate in {line:?}"));
    assert!((rate - 0.80).abs() <= 0.06, "pass rate {rate}");
    let hist = fs::read_to_string(dir.path().join("cert.histogram.csv")).unwrap();
    assert_eq!(csv_body(&hist)[0], "bin_lo,bin_hi,count");
}

#[test]
fn simulate_worst_singular_skips_lower_bound() {
    let dir = tempfile::tempdir().unwrap();
    let stem = dir.path().join("sim");
    let o = minnorm(&[
        "simulate", "--flat", "200", "--n", "20", "--noise", "worst:1", "--trials", "3", "--format", "both",
        "--out", stem.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("skipped: hypothesis violated"), "{}", stdout(&o));
    let v: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("sim.json")).unwrap()).unwrap();
    assert!(v["checks"].to_string().contains("skipped: hypothesis violated"));
    let csv = fs::read_to_string(dir.path().join("sim.csv")).unwrap();
    assert_eq!(
        csv_body(&csv)[0],
        "trial_index,xi_norm_sq,pred_error,est_error,sigma_min,deviation,identity_residual,certificate_pass,est_bound_pass"
    );
    assert_eq!(csv_body(&csv).len(), 4);
}

#[test]
fn environment_yields_to_flags() {
    let run = |env_n: Option<&str>, args: &[&str]| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_minnorm"));
        c.args(["diagnose", "--flat", "100", "--xi-norm", "1"]).args(args);
        if let Some(n) = env_n {
            c.env("MINNORM_N", n);
        }
        let o = c.output().unwrap();
        let v: Value = serde_json::from_str(&String::from_utf8_lossy(&o.stdout)).unwrap();
        v["report"]["n"].as_u64().unwrap()
    };
    assert_eq!(run(Some("4"), &[]), 4);
    assert_eq!(run(Some("4"), &["--n", "5"]), 5);
}

#[test]
fn spectrum_text_round_trips() {
    let o = minnorm(&["spectrum", "--three-level", "3", "4", "20", "0.5", "0.1", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let values: Vec<f64> = stdout(&o)
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .flat_map(|l| l.split([',', ' ']).filter(|t| !t.is_empty()).map(|t| t.parse::<f64>().unwrap()).collect::<Vec<_>>())
        .collect();
    assert_eq!(values.len(), 20);
    assert!(values.windows(2).all(|w| w[0] >= w[1]));
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qamlink_core::modem::{theoretical_ber, EbN0, QamOrder};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn qamlink(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qamlink"))
        .args(args)
        .env("RUST_LOG", "off")
        .output()
        .expect("spawn qamlink")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    let mut all: Vec<&str> = args.to_vec();
    all.extend(["--out", dir.to_str().unwrap()]);
    qamlink(&all)
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn paper() -> String {
    configs().join("paper.cfg").to_string_lossy().into_owned()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    assert!(text.ends_with('\n'), "{} lacks a trailing newline", path.display());
    text.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn budget_reports_paper_sensitivity() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["budget", "--config", &paper()]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.lines().any(|l| l == "sensitivity_dbm: -54.37"), "{out}");
    assert!(out.lines().any(|l| l == "fcc_compliant: true"));
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("budget.json")).unwrap()).unwrap();
    assert_eq!(doc["compliance"]["fcc_compliant"], true);
}

#[test]
fn budget_over_the_limit_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["budget", "--config", &paper(), "--tx-power", "25"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).lines().any(|l| l == "fcc_compliant: false"));
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("budget.json")).unwrap()).unwrap();
    assert_eq!(doc["compliance"]["fcc_compliant"], false);
}

#[test]
fn bad_config_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let missing = dir.path().join("missing.cfg");
    let o = run_in(&out, &["budget", "--config", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());

    let broken = dir.path().join("broken.cfg");
    fs::write(&broken, "tx_power_dbm = 20\nchannel.distance = 3\n").unwrap();
    for cmd in ["budget", "simulate", "spectrum", "ber-sweep"] {
        let o = run_in(&out, &[cmd, "--config", broken.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(1));
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains("line 2") && err.contains("channel.distance"), "{err}");
        assert!(!out.exists());
    }
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(qamlink(&["simulate", "--bogus"]).status.code(), Some(1));
    assert_eq!(qamlink(&["teleport"]).status.code(), Some(1));
    assert_eq!(qamlink(&["simulate", "--bits", "lots"]).status.code(), Some(1));
    assert_eq!(qamlink(&["--help"]).status.code(), Some(0));
}

#[test]
fn simulate_is_byte_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["simulate", "--config", &paper(), "--bits", "1000000", "--seed", "42"];
    assert_eq!(run_in(a.path(), &args).status.code(), Some(0));
    let o = Command::new(env!("CARGO_BIN_EXE_qamlink"))
        .args(args)
        .args(["--out", b.path().to_str().unwrap()])
        .env("QAMLINK_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    for name in ["simulation.json", "psd.csv", "tx_constellation.csv", "rx_constellation.csv"] {
        let x = fs::read(a.path().join(name)).unwrap();
        assert!(x.ends_with(b"\n"));
        assert_eq!(x, fs::read(b.path().join(name)).unwrap(), "{name} differs");
    }
    assert_eq!(csv_rows(&a.path().join("rx_constellation.csv")).len(), 4096);
}

#[test]
fn noiseless_linear_simulation_has_no_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["simulate", "--config", &paper(), "--no-noise", "--linear-pa", "--bits", "400000"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("ber 0 "), "{}", stdout(&o));
}

#[test]
fn qpsk_simulation_brackets_theory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("qpsk.cfg");
    let o = run_in(
        dir.path(),
        &["simulate", "--config", cfg.to_str().unwrap(), "--ebn0", "7", "--bits", "2000000", "--linear-pa"],
    );
    assert_eq!(o.status.code(), Some(0));
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("simulation.json")).unwrap()).unwrap();
    let theory = theoretical_ber(QamOrder::Qam4, EbN0(7.0));
    let lo = doc["ber"]["ci_low"].as_f64().unwrap();
    let hi = doc["ber"]["ci_high"].as_f64().unwrap();
    assert!(lo <= theory && theory <= hi, "{theory} outside [{lo}, {hi}]");
    assert_eq!(doc["ber"]["n_bits_run"], 2_000_000);
}

#[test]
fn theory_sweep_has_seventeen_falling_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(
        dir.path(),
        &["ber-sweep", "--modulation", "256", "--theory-only", "--from", "10", "--to", "26", "--step", "1"],
    );
    assert_eq!(o.status.code(), Some(0));
    let rows = csv_rows(&dir.path().join("waterfall.csv"));
    assert_eq!(rows.len(), 17);
    let ber: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(ber.windows(2).all(|w| w[1] < w[0]));
    assert!(rows.iter().all(|r| r.len() == 5 && r[2..].iter().all(String::is_empty)));
}

#[test]
fn sweep_through_published_ebn0() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(
        dir.path(),
        &["ber-sweep", "--modulation", "256", "--theory-only", "--from", "23.39", "--to", "23.39"],
    );
    assert_eq!(o.status.code(), Some(0));
    let rows = csv_rows(&dir.path().join("waterfall.csv"));
    assert_eq!(rows[0][0], "23.39");
    assert!(rows[0][1].parse::<f64>().unwrap() <= 1e-5);
}

#[test]
fn measured_qpsk_sweep_inside_intervals() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("qpsk.cfg");
    let o = run_in(
        dir.path(),
        &["ber-sweep", "--config", cfg.to_str().unwrap(), "--from", "2", "--to", "8", "--step", "2"],
    );
    assert_eq!(o.status.code(), Some(0));
    for r in csv_rows(&dir.path().join("waterfall.csv")) {
        let v: Vec<f64> = r.iter().map(|x| x.parse().unwrap()).collect();
        assert!(v[3] <= v[1] && v[1] <= v[4], "{r:?}");
    }
}

#[test]
fn spectrum_writes_psd_only() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["spectrum", "--config", &paper()]);
    assert_eq!(o.status.code(), Some(0));
    let rows = csv_rows(&dir.path().join("psd.csv"));
    assert!(rows.len() >= 256);
    let peak = rows.iter().map(|r| r[1].parse::<f64>().unwrap()).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(peak, 0.0);
    assert!(!dir.path().join("simulation.json").exists());
}

use std::path::Path;
use std::process::Command;

use cqed_mermin::spectroscopy::{transmission_spectrum, DetuningGrid, DispersiveParams, SpectrumCurve};
use cqed_mermin::qubits::ThreeQubitState;
use cqed_mermin::Execution;

const BIN: &str = env!("CARGO_BIN_EXE_cqed-mermin");

const READOUT: &str = r#""readout": {"gamma_mhz": [50, 230, 350], "kappa_mhz": 1.69, "epsilon_mhz": 0.1}"#;

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path
}

fn run(args: &[&str]) -> std::process::Output {
    Command::new(BIN).args(args).output().unwrap()
}

#[test]
fn missing_config_exits_2_without_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(&["mermin", "--config", "does-not-exist.json", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn malformed_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"schema": 1, "grid": {"min_mhz": 1}}"#);
    let o = run(&["spectrum", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let cfg = write_config(dir.path(), r#"{"schema": 1}"#);
    let o = run(&["spectrum", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "missing readout section");
}

#[test]
fn unreachable_schedule_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"schema": 1, "prep": {"g_mhz": 1.0, "delta_mhz": 3.3, "omega_rabi_mhz": 0.77, "tolerance": 1e-14}}"#,
    );
    let o = run(&["ghz-prep", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
}

#[test]
fn dispersive_violation_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"schema": 1, "readout": {"gamma_mhz": [50, 230, 350], "kappa_mhz": 1.69,
            "couplings_mhz": [500, 115, 175], "qubit_detunings_mhz": [1000, 2300, 3500]}}"#,
    );
    let o = run(&["validate", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(dir.path().join("validity.json").exists());
}

#[test]
fn ghz_spectrum_peaks_at_total_pull() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!(r#"{{"schema": 1, {READOUT}}}"#));
    let o = run(&[
        "spectrum",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--state",
        "ghz",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
    let curve = SpectrumCurve::from_csv_str(&text).unwrap();

    let mut order: Vec<usize> = (0..curve.len()).collect();
    order.sort_by(|&a, &b| curve.normalized[b].total_cmp(&curve.normalized[a]));
    let mut top: Vec<f64> = order[..2].iter().map(|&k| curve.frequencies_mhz[k]).collect();
    top.sort_by(f64::total_cmp);
    assert!((top[0] + 630.0).abs() < 1e-9 && (top[1] - 630.0).abs() < 1e-9, "{top:?}");

    // identical to the in-memory curve
    let expected = transmission_spectrum(
        &ThreeQubitState::ghz(),
        &DetuningGrid::default(),
        &DispersiveParams::reference(),
        Execution::Sequential,
    )
    .unwrap();
    assert_eq!(curve, expected);
}

#[test]
fn exact_mode_writes_no_spectra() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &format!(
            r#"{{"schema": 1, {READOUT}, "grid": {{"min_mhz": -700, "max_mhz": 700, "step_mhz": 0.5}},
                "settings": [{{"theta": [0, "pi/4", "pi/2"], "theta_prime": ["pi/4", "pi/4", "pi"]}}]}}"#
        ),
    );
    let o = run(&[
        "mermin",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--mode",
        "exact",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("mermin_set1.json")).unwrap()).unwrap();
    for key in [
        "settings",
        "correlators_exact",
        "correlators_spectral",
        "q_exact",
        "q_spectral",
        "delta_q",
        "probabilities_per_setting",
    ] {
        assert!(report.get(key).is_some(), "{key}");
    }
    assert_eq!(report["mode"], "exact");
    assert!(!dir.path().join("mermin_set1_e1.csv").exists());
}

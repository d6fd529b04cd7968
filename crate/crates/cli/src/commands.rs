use std::path::{Path, PathBuf};

use cqed_mermin::experiment::{
    run_mermin, verify_ghz_two_step, Ensemble, MerminReport, Mode, Verdict,
};
use cqed_mermin::ghz_prep::{fock_evolution_oracle, prepare_ghz, GhzClassOverlap, GhzSchedule};
use cqed_mermin::qubits::{joint_probabilities, JointLabel, ThreeQubitState};
use cqed_mermin::spectroscopy::{
    dispersive_validity, transmission_spectrum, PeakEstimate, SpectrumCurve, ValidityReport,
    PEAK_PRESENCE_THRESHOLD,
};
use cqed_mermin::{angular_to_mhz, Execution};
use serde::Serialize;

use crate::config::{ExperimentConfig, RawOracle};
use crate::error::{CliError, Result};

pub const DEFAULT_OUTPUT_DIR: &str = "out";
const DEFAULT_ORACLE: RawOracle = RawOracle {
    n_trunc: 12,
    dt_us: 2e-6,
};

/// Where and how a subcommand runs.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub out_dir: PathBuf,
    pub exec: Execution,
}

impl RunContext {
    pub fn new(out: Option<PathBuf>, config: &ExperimentConfig, exec: Execution) -> Self {
        let out_dir = out
            .or_else(|| config.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));
        Self { out_dir, exec }
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.out_dir).map_err(|source| CliError::Io {
            path: self.out_dir.clone(),
            source,
        })?;
        let path = self.out_dir.join(name);
        std::fs::write(&path, contents).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        Ok(path)
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Rejected(format!("cannot serialize {name}: {e}")))?;
        text.push('\n');
        self.write(name, &text)
    }

    fn write_curve(&self, name: &str, curve: &SpectrumCurve) -> Result<PathBuf> {
        self.write(name, &curve.to_csv_string())
    }
}

fn amplitudes(s: &ThreeQubitState) -> Vec<[f64; 2]> {
    s.amplitudes().iter().map(|z| [z.re, z.im]).collect()
}

#[derive(Serialize)]
struct PrepSummary {
    g_mhz: f64,
    delta_mhz: f64,
    epsilon_mhz: Option<f64>,
    omega_rabi_mhz: f64,
    strong_driving_ratio: f64,
}

#[derive(Serialize)]
struct OracleSummary {
    n_trunc: usize,
    dt_us: f64,
    steps: usize,
    fidelity_target: f64,
    fidelity_closed_form: f64,
    ghz_class: GhzClassOverlap,
    purity: f64,
    max_norm_drift: f64,
    max_top_population: f64,
}

#[derive(Serialize)]
struct PrepReport {
    params: PrepSummary,
    schedule: GhzSchedule,
    /// Against `(|000⟩ + i|111⟩)/√2`.
    fidelity_target: f64,
    ghz_class: GhzClassOverlap,
    amplitudes: Vec<[f64; 2]>,
    oracle: Option<OracleSummary>,
}

/// Schedule, closed-form state and (optionally) the truncated-Fock check.
pub fn ghz_prep(cfg: &ExperimentConfig, ctx: &RunContext, force_oracle: bool) -> Result<Vec<PathBuf>> {
    let prep = cfg.require_prep()?;
    let p = &prep.params;
    let prepared = prepare_ghz(p, prep.tolerance)?;
    let oracle = match prep.oracle.or(force_oracle.then_some(DEFAULT_ORACLE)) {
        Some(o) => {
            let out = fock_evolution_oracle(p, prepared.schedule.t, o.n_trunc, o.dt_us)?;
            Some(OracleSummary {
                n_trunc: o.n_trunc,
                dt_us: o.dt_us,
                steps: out.steps,
                fidelity_target: out.fidelity(&ThreeQubitState::ghz()),
                fidelity_closed_form: out.fidelity(&prepared.state),
                ghz_class: GhzClassOverlap::of(&out.state),
                purity: out.purity,
                max_norm_drift: out.max_norm_drift,
                max_top_population: out.max_top_population,
            })
        }
        None => None,
    };
    let report = PrepReport {
        params: PrepSummary {
            g_mhz: angular_to_mhz(p.g()),
            delta_mhz: angular_to_mhz(p.delta()),
            epsilon_mhz: p.epsilon().map(angular_to_mhz),
            omega_rabi_mhz: angular_to_mhz(p.omega_rabi()),
            strong_driving_ratio: p.strong_driving_ratio(),
        },
        schedule: prepared.schedule,
        fidelity_target: prepared.fidelity,
        ghz_class: prepared.ghz_class,
        amplitudes: amplitudes(&prepared.state),
        oracle,
    };
    println!(
        "t = {:.6} us (n = {}), fidelity vs (|000>+i|111>)/sqrt2 = {:.12}, GHZ-class fidelity = {:.12}, phase = {:.6} rad",
        report.schedule.t,
        report.schedule.n,
        report.fidelity_target,
        report.ghz_class.fidelity,
        report.ghz_class.relative_phase
    );
    if let Some(o) = &report.oracle {
        println!(
            "oracle: fidelity vs target = {:.6}, vs closed form = {:.6}, purity = {:.6}",
            o.fidelity_target, o.fidelity_closed_form, o.purity
        );
    }
    Ok(vec![ctx.write_json("ghz_prep.json", &report)?])
}

pub fn spectrum(cfg: &ExperimentConfig, ctx: &RunContext, state: &ThreeQubitState) -> Result<Vec<PathBuf>> {
    let p = cfg.require_readout()?;
    for w in p.resolvability_warnings() {
        eprintln!("warning: {w}");
    }
    let curve = transmission_spectrum(state, &cfg.grid, p, ctx.exec)?;
    if let Some(k) = curve.argmax() {
        println!(
            "{} points, maximum {:.6} (normalized) at {:.4} MHz",
            curve.len(),
            curve.normalized[k],
            curve.frequencies_mhz[k]
        );
    }
    Ok(vec![ctx.write_curve("spectrum.csv", &curve)?])
}

#[derive(Serialize)]
struct PeakSummary {
    present: Vec<String>,
    shifts_mhz: Vec<f64>,
    heights: Vec<f64>,
    p_hat: Vec<f64>,
}

impl From<&PeakEstimate> for PeakSummary {
    fn from(e: &PeakEstimate) -> Self {
        Self {
            present: e
                .present(PEAK_PRESENCE_THRESHOLD)
                .iter()
                .map(JointLabel::to_string)
                .collect(),
            shifts_mhz: e.shifts.iter().map(|&s| angular_to_mhz(s)).collect(),
            heights: e.heights.to_vec(),
            p_hat: e.p_hat.as_array().to_vec(),
        }
    }
}

#[derive(Serialize)]
struct VerifyReport<'a> {
    state: &'a str,
    ensemble: &'static str,
    verdict: Verdict,
    raw: PeakSummary,
    rotated: PeakSummary,
}

/// Two-step confirmation. With `dephased`, the input is replaced by the
/// classical mixture of basis states with the same joint probabilities.
pub fn verify(
    cfg: &ExperimentConfig,
    ctx: &RunContext,
    state: &ThreeQubitState,
    state_spec: &str,
    dephased: bool,
) -> Result<Vec<PathBuf>> {
    let p = cfg.require_readout()?;
    let ensemble = if dephased {
        let probs = joint_probabilities(state);
        Ensemble::mixture(
            JointLabel::all()
                .filter(|&l| probs.get(l) > 0.0)
                .map(|l| (probs.get(l), ThreeQubitState::basis(l)))
                .collect(),
        )?
    } else {
        Ensemble::pure(*state)
    };
    let v = verify_ghz_two_step(&ensemble, p, &cfg.grid, ctx.exec)?;
    let report = VerifyReport {
        state: state_spec,
        ensemble: if dephased { "dephased" } else { "pure" },
        verdict: v.verdict,
        raw: (&v.raw_peaks).into(),
        rotated: (&v.rotated_peaks).into(),
    };
    println!(
        "verdict: {} (raw peaks {}, rotated peaks {})",
        v.verdict.as_str(),
        report.raw.present.len(),
        report.rotated.present.len()
    );
    Ok(vec![
        ctx.write_curve("verify_raw.csv", &v.raw)?,
        ctx.write_curve("verify_rotated.csv", &v.rotated)?,
        ctx.write_json("verify.json", &report)?,
    ])
}

/// Runs every configured settings set. Reports go to `mermin_set<k>.json`;
/// unless the mode is `exact`, the four spectra go to
/// `mermin_set<k>_e<j>.csv`.
pub fn mermin(
    cfg: &ExperimentConfig,
    ctx: &RunContext,
    state: &ThreeQubitState,
    mode: Mode,
) -> Result<Vec<PathBuf>> {
    let p = cfg.require_readout()?;
    if cfg.settings.is_empty() {
        return Err(CliError::Config("mermin needs at least one entry in \"settings\"".into()));
    }
    let mut written = Vec::new();
    for (k, settings) in cfg.settings.iter().enumerate() {
        let run = run_mermin(state, settings, mode, p, &cfg.grid, ctx.exec)?;
        print_report(k + 1, &run.report);
        written.push(ctx.write_json(&format!("mermin_set{}.json", k + 1), &run.report)?);
        if mode != Mode::Exact {
            for (j, curve) in run.spectra.iter().enumerate() {
                written.push(ctx.write_curve(&format!("mermin_set{}_e{}.csv", k + 1, j + 1), curve)?);
            }
        }
    }
    Ok(written)
}

fn print_report(k: usize, r: &MerminReport) {
    let fmt = |e: &[f64; 4]| e.map(|x| format!("{x:.4}")).join(", ");
    println!(
        "set {k}: E_exact = ({}), E_spectral = ({}), Q_exact = {:.6}, Q_spectral = {:.6}, dQ = {:.6}",
        fmt(&r.correlators_exact),
        fmt(&r.correlators_spectral),
        r.q_exact,
        r.q_spectral,
        r.delta_q
    );
}

#[derive(Serialize)]
struct ValidateReport {
    report: ValidityReport,
    resolvability_warnings: Vec<String>,
}

/// Writes the dispersive-condition report; fails with exit code 2 when any
/// ratio is flagged.
pub fn validate(cfg: &ExperimentConfig, ctx: &RunContext) -> Result<Vec<PathBuf>> {
    let p = cfg.require_readout()?;
    let report = dispersive_validity(p)?;
    let flagged: Vec<String> = report
        .checks()
        .filter(|c| c.flagged)
        .map(|c| format!("{} = {:.4}", c.label, c.value))
        .collect();
    let path = ctx.write_json(
        "validity.json",
        &ValidateReport {
            report,
            resolvability_warnings: p.resolvability_warnings(),
        },
    )?;
    if flagged.is_empty() {
        println!("dispersive condition satisfied");
        Ok(vec![path])
    } else {
        Err(CliError::Rejected(format!(
            "dispersive condition violated: {}",
            flagged.join(", ")
        )))
    }
}

pub fn display_paths(paths: &[PathBuf]) -> String {
    paths.iter().map(|p| Path::display(p).to_string()).collect::<Vec<_>>().join(", ")
}

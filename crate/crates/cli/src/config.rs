//! Experiment configuration.
//!
//! Config files are JSON with `"schema": 1`. Every frequency is a linear
//! frequency in MHz; it is multiplied by 2π exactly once, here, and the rest
//! of the program works in rad/µs. Angles are radians, given either as
//! numbers or as strings such as `"3/4 pi"`, `"-pi"`, `"pi/2"` or `"0.25"`.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use cqed_mermin::experiment::{MerminSettings, Mode};
use cqed_mermin::ghz_prep::PrepParams;
use cqed_mermin::mhz_to_angular;
use cqed_mermin::qubits::ThreeQubitState;
use cqed_mermin::spectroscopy::{DetuningGrid, DispersiveParams, DEFAULT_READOUT_DRIVE_MHZ};
use serde::Deserialize;

use crate::error::{CliError, Result};
use crate::state_spec::state_spec_parse;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub schema: u32,
    #[serde(default)]
    pub prep: Option<RawPrep>,
    #[serde(default)]
    pub readout: Option<RawReadout>,
    #[serde(default)]
    pub grid: Option<RawGrid>,
    #[serde(default)]
    pub settings: Vec<RawSettings>,
    /// State spec used by `spectrum`, `verify` and `mermin`.
    #[serde(default)]
    pub state: Option<String>,
    #[serde(default)]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPrep {
    pub g_mhz: f64,
    pub delta_mhz: f64,
    /// Exactly one of `epsilon_mhz` and `omega_rabi_mhz`.
    #[serde(default)]
    pub epsilon_mhz: Option<f64>,
    #[serde(default)]
    pub omega_rabi_mhz: Option<f64>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub oracle: Option<RawOracle>,
}

fn default_tolerance() -> f64 {
    1e-9
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawOracle {
    pub n_trunc: usize,
    pub dt_us: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawReadout {
    pub gamma_mhz: [f64; 3],
    pub kappa_mhz: f64,
    #[serde(default)]
    pub epsilon_mhz: Option<f64>,
    #[serde(default)]
    pub couplings_mhz: Option<[f64; 3]>,
    #[serde(default)]
    pub qubit_detunings_mhz: Option<[f64; 3]>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawGrid {
    pub min_mhz: f64,
    pub max_mhz: f64,
    pub step_mhz: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSettings {
    pub theta: [Angle; 3],
    pub theta_prime: [Angle; 3],
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Angle {
    Radians(f64),
    Text(String),
}

impl Angle {
    pub fn radians(&self) -> Result<f64> {
        match self {
            Angle::Radians(x) => Ok(*x),
            Angle::Text(t) => parse_angle(t),
        }
    }
}

/// `"p/q pi"`, `"p pi"`, `"pi/q"`, `"pi"`, with an optional sign, or a plain
/// number of radians. The multiple of π is computed as `p·π/q`.
pub fn parse_angle(text: &str) -> Result<f64> {
    let bad = |reason: &str| CliError::parse("angle", text, reason);
    let s: String = text
        .chars()
        .filter(|c| !c.is_whitespace())
        .collect::<String>()
        .to_ascii_lowercase()
        .replace('π', "pi");
    if s.is_empty() {
        return Err(bad("empty"));
    }
    let (sign, body) = match s.strip_prefix('-') {
        Some(rest) => (-1.0, rest),
        None => (1.0, s.strip_prefix('+').unwrap_or(&s)),
    };
    let number = |x: &str| -> Result<f64> {
        x.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| bad("not a number"))
    };
    let ratio = |x: &str| -> Result<(f64, f64)> {
        match x.split_once('/') {
            Some((p, q)) => Ok((number(p)?, number(q)?)),
            None => Ok((number(x)?, 1.0)),
        }
    };

    let (p, q) = if !body.contains("pi") {
        return Ok(sign * number(body)?);
    } else if let Some(rest) = body.strip_prefix("pi") {
        // "pi", "pi/q"
        match rest {
            "" => (1.0, 1.0),
            r => (1.0, number(r.strip_prefix('/').ok_or_else(|| bad("expected pi/q"))?)?),
        }
    } else if let Some(coef) = body.strip_suffix("pi") {
        // "p/q pi", "p pi", "p*pi"
        ratio(coef.strip_suffix('*').unwrap_or(coef))?
    } else if let Some((head, q)) = body.split_once("pi/") {
        // "3pi/4"
        (number(head.strip_suffix('*').unwrap_or(head))?, number(q)?)
    } else {
        return Err(bad("unrecognized form"));
    };
    if q == 0.0 {
        return Err(bad("zero denominator"));
    }
    Ok(sign * p * PI / q)
}

/// A validated configuration in internal units.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub prep: Option<PrepConfig>,
    pub readout: Option<DispersiveParams>,
    pub grid: DetuningGrid,
    pub settings: Vec<MerminSettings>,
    pub state: ThreeQubitState,
    pub state_spec: String,
    pub mode: Mode,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy)]
pub struct PrepConfig {
    pub params: PrepParams,
    pub tolerance: f64,
    pub oracle: Option<RawOracle>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read {}: {e}", path.display()))
        })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawConfig =
            serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        Self::from_raw(raw)
    }

    pub fn from_raw(raw: RawConfig) -> Result<Self> {
        if raw.schema != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "unsupported schema {} (expected {SCHEMA_VERSION})",
                raw.schema
            )));
        }
        let prep = raw.prep.map(resolve_prep).transpose()?;
        let readout = raw.readout.map(resolve_readout).transpose()?;
        let grid = match raw.grid {
            Some(g) => DetuningGrid::new(g.min_mhz, g.max_mhz, g.step_mhz)
                .map_err(|e| CliError::Config(format!("grid: {e}")))?,
            None => DetuningGrid::default(),
        };
        let settings = raw
            .settings
            .iter()
            .map(|s| {
                let angles = |a: &[Angle; 3]| -> Result<[f64; 3]> {
                    Ok([a[0].radians()?, a[1].radians()?, a[2].radians()?])
                };
                MerminSettings::new(angles(&s.theta)?, angles(&s.theta_prime)?)
                    .map_err(|e| CliError::Config(format!("settings: {e}")))
            })
            .collect::<Result<_>>()?;
        let state_spec = raw.state.unwrap_or_else(|| "ghz".to_owned());
        let state = state_spec_parse(&state_spec)?;
        Ok(Self {
            prep,
            readout,
            grid,
            settings,
            state,
            state_spec,
            mode: raw.mode.unwrap_or_default(),
            output_dir: raw.output_dir,
        })
    }

    pub fn require_prep(&self) -> Result<&PrepConfig> {
        self.prep
            .as_ref()
            .ok_or_else(|| CliError::Config("missing \"prep\" section".into()))
    }

    pub fn require_readout(&self) -> Result<&DispersiveParams> {
        self.readout
            .as_ref()
            .ok_or_else(|| CliError::Config("missing \"readout\" section".into()))
    }
}

fn resolve_prep(raw: RawPrep) -> Result<PrepConfig> {
    let g = mhz_to_angular(raw.g_mhz);
    let delta = mhz_to_angular(raw.delta_mhz);
    let params = match (raw.epsilon_mhz, raw.omega_rabi_mhz) {
        (Some(eps), None) => PrepParams::from_drive(g, delta, mhz_to_angular(eps)),
        (None, Some(om)) => PrepParams::from_rabi(g, delta, mhz_to_angular(om)),
        _ => {
            return Err(CliError::Config(
                "prep needs exactly one of epsilon_mhz and omega_rabi_mhz".into(),
            ))
        }
    }
    .map_err(|e| CliError::Config(format!("prep: {e}")))?;
    if !(raw.tolerance > 0.0) {
        return Err(CliError::Config(format!("prep tolerance {} must be > 0", raw.tolerance)));
    }
    Ok(PrepConfig {
        params,
        tolerance: raw.tolerance,
        oracle: raw.oracle,
    })
}

fn resolve_readout(raw: RawReadout) -> Result<DispersiveParams> {
    let eps = raw.epsilon_mhz.unwrap_or(DEFAULT_READOUT_DRIVE_MHZ);
    let p = DispersiveParams::new(
        raw.gamma_mhz.map(mhz_to_angular),
        mhz_to_angular(raw.kappa_mhz),
        mhz_to_angular(eps),
    )
    .map_err(|e| CliError::Config(format!("readout: {e}")))?;
    match (raw.couplings_mhz, raw.qubit_detunings_mhz) {
        (Some(g), Some(d)) => p
            .with_circuit(g.map(mhz_to_angular), d.map(mhz_to_angular))
            .map_err(|e| CliError::Config(format!("readout: {e}"))),
        (None, None) => Ok(p),
        _ => Err(CliError::Config(
            "readout: couplings_mhz and qubit_detunings_mhz go together".into(),
        )),
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cqed_mermin::experiment::Mode;
use cqed_mermin::Execution;
use cqed_mermin_cli::commands::{self, RunContext};
use cqed_mermin_cli::config::ExperimentConfig;
use cqed_mermin_cli::state_spec::state_spec_parse;
use cqed_mermin_cli::Result;

/// Three-qubit Mermin test in a driven cavity.
///
/// All frequencies in the config file are linear frequencies in MHz; they are
/// converted to angular units (x 2 pi, rad/us) once, when the config is read.
/// Exit status: 0 on success, 2 on invalid input, 3 on numerical failure.
#[derive(Parser)]
#[command(name = "cqed-mermin", version, about, long_about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config (schema 1).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: the config's output_dir, else ./out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Q to headline and artifacts to write.
    #[arg(long, value_enum)]
    mode: Option<CliMode>,
    /// Evaluate grid points one at a time instead of in parallel.
    #[arg(long)]
    sequential: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum CliMode {
    Exact,
    Spectral,
    Both,
}

impl From<CliMode> for Mode {
    fn from(m: CliMode) -> Self {
        match m {
            CliMode::Exact => Mode::Exact,
            CliMode::Spectral => Mode::Spectral,
            CliMode::Both => Mode::Both,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// GHZ preparation schedule and fidelity report.
    GhzPrep {
        #[command(flatten)]
        common: Common,
        /// Also integrate the driven Hamiltonian on a truncated Fock space.
        #[arg(long)]
        oracle: bool,
    },
    /// Transmission spectrum of one state.
    Spectrum {
        #[command(flatten)]
        common: Common,
        /// ghz, ghz-noi, |ijk> or eight comma-separated amplitudes.
        #[arg(long)]
        state: Option<String>,
    },
    /// Two-step GHZ confirmation (raw and rotated spectra plus verdict).
    Verify {
        #[command(flatten)]
        common: Common,
        /// Overrides the config's state (same syntax as `spectrum --state`).
        #[arg(long)]
        state: Option<String>,
        /// Use the classical mixture with the state's joint probabilities.
        #[arg(long)]
        dephased: bool,
    },
    /// Mermin Q for every settings set in the config.
    Mermin {
        #[command(flatten)]
        common: Common,
        /// Overrides the config's state (same syntax as `spectrum --state`).
        #[arg(long)]
        state: Option<String>,
    },
    /// Dispersive-condition report.
    Validate {
        #[command(flatten)]
        common: Common,
    },
}

fn run(cli: Cli) -> Result<Vec<PathBuf>> {
    let common = match &cli.command {
        Command::GhzPrep { common, .. }
        | Command::Spectrum { common, .. }
        | Command::Verify { common, .. }
        | Command::Mermin { common, .. }
        | Command::Validate { common } => common,
    };
    let cfg = ExperimentConfig::load(&common.config)?;
    let exec = if common.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let ctx = RunContext::new(common.out.clone(), &cfg, exec);
    let mode = common.mode.map(Mode::from).unwrap_or(cfg.mode);
    let state_of = |spec: &Option<String>| -> Result<(cqed_mermin::qubits::ThreeQubitState, String)> {
        match spec {
            Some(s) => Ok((state_spec_parse(s)?, s.clone())),
            None => Ok((cfg.state, cfg.state_spec.clone())),
        }
    };

    match &cli.command {
        Command::GhzPrep { oracle, .. } => commands::ghz_prep(&cfg, &ctx, *oracle),
        Command::Spectrum { state, .. } => commands::spectrum(&cfg, &ctx, &state_of(state)?.0),
        Command::Verify { state, dephased, .. } => {
            let (s, spec) = state_of(state)?;
            commands::verify(&cfg, &ctx, &s, &spec, *dephased)
        }
        Command::Mermin { state, .. } => commands::mermin(&cfg, &ctx, &state_of(state)?.0, mode),
        Command::Validate { .. } => commands::validate(&cfg, &ctx),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(paths) => {
            if !paths.is_empty() {
                println!("wrote {}", commands::display_paths(&paths));
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

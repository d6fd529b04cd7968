//! Command-line front end for `cqed-mermin`: config ingestion, subcommands
//! and artifact writing.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod state_spec;

pub use error::{CliError, Result};

//! File formats, reports and the command layer behind the `diffinc` binary.
//!
//! The numerical work lives in [`diffinc_core`]; this crate reads curve
//! descriptions, writes field dumps and CSV tables, and wraps every command
//! result in a deterministic report envelope.

#![forbid(unsafe_code)]

pub mod cli;
pub mod commands;
pub mod curvefile;
pub mod dump;
mod error;
pub mod report;

pub use diffinc_core as core;
pub use error::{CliError, ExitStatus};

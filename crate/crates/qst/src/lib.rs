//! Experiments, file formats and the command-line driver built on
//! [`qst_core`].
//!
//! * [`config`] is the strict JSON configuration with `key=value` overrides.
//! * [`experiments`] runs transfers and the bus, disorder, dephasing and
//!   Zeno-gap sweeps.
//! * [`io`] writes the CSV datasets and `manifest.json`.
//! * [`cli`] parses arguments and dispatches commands.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod io;

pub use config::ExperimentConfig;
pub use error::{Error, Result};

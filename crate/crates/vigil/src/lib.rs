//! IO, file formats, and the command-line front end for the vigil
//! predictive-maintenance toolkit.
//!
//! The algorithms live in `vigil-core`; this crate adds everything that
//! touches the filesystem: the flat-file artifact envelope, delimited
//! dataset and report formats, run configuration with resolved echoes, and
//! the `generate` / `detect` / `classify` / `inspect` commands.

pub mod cli;
pub mod config;
pub mod envelope;
pub mod error;
pub mod fsutil;
pub mod manifest;
pub mod pipeline;
pub mod tables;

pub use error::{CliError, Result};

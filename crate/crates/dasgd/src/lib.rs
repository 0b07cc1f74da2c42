//! Command-line tool, file formats and experiment harness around
//! [`dasgd_core`].
//!
//! - [`io`]: dataset CSV, model JSON and trace CSV.
//! - [`config`]: JSON configuration of every subcommand.
//! - [`harness`]: the seeded experiment grid and its CSV tables.
//! - [`online`]: streaming runs with regret tracking.
//! - [`timing`]: the wall-clock study.
//! - [`cli`]: argument parsing and subcommand dispatch.

pub mod cli;
pub mod config;
pub mod error;
pub mod harness;
pub mod io;
pub mod online;
pub mod timing;

pub use error::{CliError, Result};

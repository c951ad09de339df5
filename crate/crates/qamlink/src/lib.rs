//! Scenario files, a threaded simulation driver, report writers and the
//! `qamlink` command line, on top of [`qamlink_core`].

pub mod cli;
pub mod config;
pub mod report;
pub mod runner;

pub use config::{ConfigError, RunConfig};

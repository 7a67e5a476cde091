//! Command-line front end for the underwater QKD performance library.
//!
//! The pieces are deliberately separable: [`config`] turns a TOML scenario
//! file (plus `--set` overrides) into validated core types, [`commands`]
//! runs one of the eight subcommands against a scenario and returns a
//! [`table::ResultTable`], and [`table`] renders that table as CSV or JSON.
//! The `uwqkd` binary is a thin wrapper that wires these together and maps
//! errors to exit codes.

pub mod commands;
pub mod config;
pub mod error;
pub mod table;

pub use commands::{run_subcommand, Subcommand};
pub use config::{parse_config, parse_config_str, Scenario};
pub use error::CliError;
pub use table::{Format, ResultTable};

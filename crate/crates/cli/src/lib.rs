//! Configuration, output writers and subcommands of the `porous-opt` binary.

pub mod commands;
pub mod config;
pub mod output;

pub use config::{parse_config, parse_str, RunSpec};

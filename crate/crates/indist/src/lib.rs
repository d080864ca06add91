//! File formats, run manifests and the `indist` command line on top of
//! `indist-core`.

pub mod cli;
pub mod formats;
pub mod manifest;

pub use cli::{run, run_args, Cli, CliError};

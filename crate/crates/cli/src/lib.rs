//! File formats, parallel sweeps and the `sparse-lqr` command line on top of
//! [`sparse_lqr_core`].

pub mod cli;
pub mod commands;
pub mod error;
pub mod files;
pub mod manifest;
pub mod table;

use std::ffi::OsString;

use clap::Parser;

pub use error::{CliError, Result};

/// Parse `argv` (program name first), run the command and return the exit
/// code. Diagnostics go to stderr.
pub fn main_with_args(argv: Vec<OsString>) -> i32 {
    let cli = match cli::Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                error::EXIT_USAGE
            } else {
                error::EXIT_OK
            };
            let _ = e.print();
            return code;
        }
    };
    let raw: Vec<String> = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match commands::execute(&cli, &raw) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

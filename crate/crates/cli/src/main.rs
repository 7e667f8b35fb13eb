use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use cbrne_cli::{Cli, EXIT_FAILURE};

fn main() -> ExitCode {
    match Cli::try_parse() {
        Ok(cli) => ExitCode::from(cbrne_cli::execute(cli)),
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            ExitCode::SUCCESS
        }
        Err(e) => {
            // Usage errors are configuration errors; exit code 2 is reserved
            // for aborted runs.
            let _ = e.print();
            ExitCode::from(EXIT_FAILURE)
        }
    }
}

use std::process::ExitCode;

use clap::Parser;
use tssort_cli::{run, Cli};

fn main() -> ExitCode {
    run(Cli::parse())
}

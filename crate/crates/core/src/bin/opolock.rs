use std::process::ExitCode;

use clap::Parser;
use opolock::cli::{run, Cli};

fn main() -> ExitCode {
    run(Cli::parse())
}

use std::process::ExitCode;

use ats_bsde::cli::{run, Args};
use clap::Parser;

fn main() -> ExitCode {
    let args = Args::parse();
    let result = run(&args);
    if let Err(e) = &result {
        eprintln!("error: {e:#}");
    }
    ExitCode::from(ats_bsde::exit_code(&result))
}

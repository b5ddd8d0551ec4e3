use std::process::ExitCode;

use clap::Parser;
use qpuvirt_bench::{report, run_ddcl, run_mcvqe, verify_counts, Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::McvqeGrad(args) => run_mcvqe(args).and_then(|o| report("mcvqe", &args.sweep, &o)),
        Command::DdclGrad(args) => run_ddcl(args).and_then(|o| report("ddcl", &args.sweep, &o)),
        Command::VerifyCounts => match verify_counts(&mut std::io::stdout()) {
            Ok(true) => Ok(()),
            Ok(false) => {
                eprintln!("error: closed-form counts disagree with the reference tables");
                return ExitCode::FAILURE;
            }
            Err(e) => Err(e.into()),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

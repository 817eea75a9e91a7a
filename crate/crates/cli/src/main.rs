use std::process::ExitCode;

use clap::Parser;
use harmonic_fem_cli::args::Cli;

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match harmonic_fem_cli::run(cli, &argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hfem: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

mod args;
mod commands;
mod report;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };

    let outcome = match cli.command {
        Command::Reduce { input, seed, output, tol } => {
            commands::cmd_reduce(&input, seed, output.as_deref(), &tol)
        }
        Command::Classify { input, seed, output, tol } => {
            commands::cmd_classify(&input, seed, output.as_deref(), &tol)
        }
        Command::Verify { input, seeds, output, debug_corrupt_k, tol } => {
            commands::cmd_verify(&input, &seeds, output.as_deref(), debug_corrupt_k, &tol)
        }
        Command::Generate { kind, mode, n, signature, epsilon, seed, output, tol } => {
            commands::cmd_generate(
                kind,
                mode.into(),
                n,
                signature,
                epsilon,
                seed,
                output.as_deref(),
                &tol,
            )
        }
        Command::Path { inputs, family, seed, output, tol } => {
            commands::cmd_path(&inputs, family.as_deref(), seed, output.as_deref(), &tol)
        }
    };

    if let Err(e) = outcome {
        eprintln!("crreduce: {}", e.message);
        std::process::exit(e.code);
    }
}

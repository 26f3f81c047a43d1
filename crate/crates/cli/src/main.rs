use std::process::ExitCode;

use clap::Parser;
use sheetaudit::commands::{self, now_ms};
use sheetaudit::{Cli, Command, EXIT_CLEAN};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Audit(args) => commands::audit(args, now_ms),
        Command::ExportDot(args) => commands::export(args).map(|paths| {
            for p in paths {
                println!("{}", p.display());
            }
            EXIT_CLEAN
        }),
        Command::Fixture(args) => commands::fixture(args).map(|(wb, truth)| {
            println!("{}\n{}", wb.display(), truth.display());
            EXIT_CLEAN
        }),
        Command::Serve(args) => commands::serve(args).map(|()| EXIT_CLEAN),
    };
    match result {
        Ok(status) => ExitCode::from(status),
        Err(failure) => {
            // library errors already carry their cause in the message
            eprintln!("sheetaudit: {}", failure.error);
            ExitCode::from(failure.status)
        }
    }
}

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use cbl_cli::{error_json, exit_code, run, stdout_document, Cli};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", error_json(None, "usage", e.to_string().trim_end()));
            return ExitCode::from(1);
        }
    };
    let name = cli.command.name();
    std::panic::set_hook(Box::new(|_| {}));
    match std::panic::catch_unwind(|| run(&cli)) {
        Ok(Ok(outcome)) => {
            println!("{}", serde_json::to_string_pretty(&stdout_document(&outcome)).expect("JSON values serialise"));
            ExitCode::SUCCESS
        }
        Ok(Err(e)) => {
            eprintln!("{}", error_json(Some(name), e.kind(), &e.to_string()));
            ExitCode::from(exit_code(&e) as u8)
        }
        Err(_) => {
            eprintln!("{}", error_json(Some(name), "internal", "unexpected internal failure"));
            ExitCode::from(2)
        }
    }
}

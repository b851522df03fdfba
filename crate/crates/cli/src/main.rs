use std::process::ExitCode;

use detglue_cli::{main_with, CliError};

fn main() -> ExitCode {
    match main_with(std::env::args_os()) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(CliError::Help(text)) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("detglue: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

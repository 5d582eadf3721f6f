use std::process::ExitCode;

use clap::Parser;
use diffinc::cli::Cli;
use diffinc::commands::run;
use diffinc::ExitStatus;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(ExitStatus::Config.code() as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(o) => {
            println!("{}", o.summary);
            for f in &o.files {
                println!("  wrote {}", f.display());
            }
            ExitCode::from(o.status.code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_status().code() as u8)
        }
    }
}

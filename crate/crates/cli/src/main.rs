use std::io::Write;
use std::process::ExitCode;

use calderon_cli::{run, Cli};
use clap::Parser;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match cli.descriptor().and_then(|d| run(&d)) {
        Ok(o) => {
            let mut stdout = std::io::stdout().lock();
            let _ = writeln!(stdout, "{}", o.summary);
            let _ = writeln!(stdout, "outputs in {}", o.out.display());
            if let Some(e) = &o.failure {
                eprintln!("error: {e}");
            }
            ExitCode::from(o.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

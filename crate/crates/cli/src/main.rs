use std::process::ExitCode;

use clap::Parser;
use pacroute_cli::{run, Cli, Status};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let mut stdout = std::io::stdout().lock();
    match run(&cli, &mut stdout) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(status) => {
            match status {
                Status::Infeasible => eprintln!("pacroute: no threshold meets the budget; every item goes to the expert"),
                _ => eprintln!("pacroute: coverage assertions failed"),
            }
            ExitCode::from(status.code())
        }
        Err(e) => {
            eprintln!("pacroute {}: {e}", cli.command.name());
            ExitCode::from(e.code())
        }
    }
}

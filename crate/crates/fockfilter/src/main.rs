use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use fockfilter::{commands, ExperimentSpec};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let spec = match ExperimentSpec::try_parse() {
        Ok(spec) => spec,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match commands::run(&spec) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fockfilter: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

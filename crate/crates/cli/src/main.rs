mod args;
mod commands;
mod config;

use std::fs;
use std::process::ExitCode;

use clap::Parser;
use mrf_explain::{Error, Result};

use args::{Cli, Command};
use commands::Outcome;
use config::RunConfig;

const EXIT_INPUT: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

fn load_config(path: &std::path::Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let config: RunConfig = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })?;
    config.validate()?;
    Ok(config)
}

fn execute(cli: Cli) -> Result<Outcome> {
    let config = match &cli.command {
        Command::Rerun { config, out } => {
            let mut c = load_config(config)?;
            if let Some(out) = out {
                c.out = out.clone();
            }
            c
        }
        Command::Infer(a)
        | Command::Explain(a)
        | Command::Baseline(a)
        | Command::Eval(a)
        | Command::Bench(a)
        | Command::Generate(a) => RunConfig::resolve(&cli.command, a)?,
    };
    commands::run(&config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(outcome) if outcome.failures.is_empty() => ExitCode::SUCCESS,
        Ok(outcome) => {
            eprintln!("{} item(s) failed", outcome.failures.len());
            ExitCode::from(EXIT_PARTIAL)
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                ExitCode::from(EXIT_NUMERICAL)
            } else {
                ExitCode::from(EXIT_INPUT)
            }
        }
    }
}

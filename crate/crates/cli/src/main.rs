mod args;
mod config;
mod error;
mod exec;
mod output;
mod resolve;

use std::path::Path;
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, CliCommand};
use config::{Artifact, Outputs, RunConfig, VERSION};
use error::{CliError, CliResult};

fn threads_from_env() -> CliResult<usize> {
    match std::env::var("TORSIO_THREADS") {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(CliError::Usage(format!("TORSIO_THREADS={s} is not a positive integer"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|source| CliError::Write { path: path.into(), source })
}

fn run(cli: Cli) -> CliResult<u8> {
    let (cfg, dest) = match &cli.command {
        CliCommand::Rerun { artifact, out_dir } => {
            let text = std::fs::read_to_string(artifact)
                .map_err(|source| CliError::Read { path: artifact.clone(), source })?;
            let a: Artifact<serde_json::Value> =
                serde_json::from_str(&text).map_err(|source| CliError::Parse { path: artifact.clone(), source })?;
            if a.run_config.version != VERSION {
                eprintln!("warning: artifact written by version {}, running {VERSION}", a.run_config.version);
            }
            let dest = match out_dir {
                Some(d) => a.run_config.outputs.rebased(d),
                None => a.run_config.outputs.clone(),
            };
            (a.run_config, dest)
        }
        other => {
            let (command, outputs) = resolve::resolve(other)?;
            let dest: Outputs = outputs.clone();
            (RunConfig::new(command, outputs, threads_from_env()?), dest)
        }
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build_global()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    let outcome = exec::execute(&cfg)?;
    match &dest.json {
        Some(p) => write(p, &outcome.json)?,
        None => print!("{}", outcome.json),
    }
    match (&dest.csv, &outcome.csv) {
        (Some(p), Some(csv)) => write(p, csv)?,
        (Some(_), None) => eprintln!("warning: this command has no CSV output"),
        _ => {}
    }
    eprintln!("{}", outcome.summary.trim_end());
    Ok(outcome.status)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

mod cli;
mod commands;
mod config;
mod error;
mod summary;
mod tools;

use std::path::Path;
use std::process::ExitCode;

use clap::Parser;

use crate::cli::Cli;
use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult};
use crate::summary::Run;

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let config = load_config(&cli);
    let mut run = Run::new(
        cli.command.name(),
        argv,
        config.as_ref().cloned().unwrap_or_default(),
        cli.force,
    );
    let outcome = config
        .and_then(|_| check_summary_path(&run, cli.summary.as_deref()))
        .and_then(|_| commands::dispatch(&mut run, &cli.command));
    let err = outcome.err();
    if let Some(e) = &err {
        log::error!("{e}");
        eprintln!("error: {e}");
    }
    let text = run.to_json(err.as_ref());
    match &cli.summary {
        Some(path) if !matches!(err, Some(CliError::OutputExists(ref p)) if p == path) => {
            if let Err(e) = std::fs::write(path, &text) {
                eprintln!("error: cannot write summary {}: {e}", path.display());
                print!("{text}");
            }
        }
        _ => print!("{text}"),
    }
    ExitCode::from(err.map_or(0, |e| e.exit_code()) as u8)
}

/// Config file (or defaults) with the global seed and the command's flags applied.
fn load_config(cli: &Cli) -> CliResult<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cli.command.apply(&mut cfg);
    Ok(cfg)
}

fn check_summary_path(run: &Run, path: Option<&Path>) -> CliResult<()> {
    match path {
        Some(p) => run.claim(p),
        None => Ok(()),
    }
}

mod args;
mod commands;
mod error;
mod report;

use std::ffi::OsString;
use std::fs;

use clap::error::ErrorKind;
use clap::Parser;

use crate::args::Cli;
use crate::commands::{execute, out_dir, Run};
use crate::error::CliError;
use crate::report::{unix_now, RunManifest};

const LOG_LEVELS: [&str; 4] = ["error", "warn", "info", "debug"];

fn init_logging() -> Result<(), CliError> {
    if let Ok(level) = std::env::var("NDS_LOG_LEVEL") {
        if !LOG_LEVELS.contains(&level.as_str()) {
            return Err(CliError::Usage(format!("NDS_LOG_LEVEL must be one of {}, got {level:?}", LOG_LEVELS.join(", "))));
        }
    }
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("NDS_LOG_LEVEL", "warn")).format_timestamp(None).init();
    Ok(())
}

fn run(argv: Vec<OsString>) -> i32 {
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    if let Err(e) = init_logging() {
        eprintln!("error: {e}");
        return e.exit_code();
    }
    if let Some(w) = cli.workers {
        if w == 0 {
            eprintln!("error: --workers must be at least 1");
            return 1;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w).build_global() {
            eprintln!("error: {e}");
            return 2;
        }
    }
    let dir = out_dir(&cli.command).to_path_buf();
    if let Err(e) = fs::create_dir_all(&dir) {
        eprintln!("error: cannot create {}: {e}", dir.display());
        return 2;
    }
    let started = unix_now();
    let mut state = Run::default();
    let outcome = execute(&cli.command, &mut state);
    let code = match &outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    let manifest = RunManifest {
        subcommand: cli.command.name().into(),
        version: env!("CARGO_PKG_VERSION").into(),
        args: argv.iter().map(|a| a.to_string_lossy().into_owned()).collect(),
        config: state.config,
        seed: state.seed,
        started_unix: started,
        finished_unix: unix_now(),
        artifacts: state.artifacts,
        exit_status: code,
        error: outcome.err().map(|e| e.to_string()),
    };
    let path = dir.join("manifest.json");
    match serde_json::to_string_pretty(&manifest) {
        Ok(text) => {
            if let Err(e) = fs::write(&path, text + "\n") {
                eprintln!("error: cannot write {}: {e}", path.display());
                return if code == 0 { 2 } else { code };
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    }
    code
}

fn main() {
    std::process::exit(run(std::env::args_os().collect()));
}

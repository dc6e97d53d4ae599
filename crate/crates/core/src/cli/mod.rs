//! The `engae` command-line interface.

mod args;
mod commands;
pub mod pipeline;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::Path;

use clap::{CommandFactory, Parser};

pub use args::{Cli, Command};

use crate::error::{Error, Result};

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "ENGAE_THREADS";

/// Parses a flat configuration file: one `key = value` per line, `#`
/// comments, blank lines ignored. Keys may use `_` or `-`.
pub fn parse_config_file(text: &str, source: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "{source}:{}: expected 'key = value'",
                i + 1
            )));
        };
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            return Err(Error::Config(format!("{source}:{}: empty key", i + 1)));
        }
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(Error::Config(format!("{source}:{}: duplicate key '{key}'", i + 1)));
        }
    }
    Ok(out)
}

/// Turns config-file entries into flags for `subcommand`, rejecting keys the
/// subcommand does not know.
fn config_flags(subcommand: &str, path: &Path) -> Result<Vec<OsString>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let entries = parse_config_file(&text, &path.display().to_string())?;
    let cmd = Cli::command();
    let sub = cmd
        .find_subcommand(subcommand)
        .expect("parsed subcommand exists");
    let mut flags = Vec::new();
    for (key, value) in entries {
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()) && key != "config");
        let Some(arg) = arg else {
            return Err(Error::Config(format!(
                "{}: unknown key '{key}' for {subcommand}",
                path.display()
            )));
        };
        if arg.get_action().takes_values() {
            flags.push(format!("--{key}").into());
            flags.push(value.into());
        } else {
            match value.as_str() {
                "true" => flags.push(format!("--{key}").into()),
                "false" => {}
                other => {
                    return Err(Error::Config(format!(
                        "{}: '{key}' expects true or false, got '{other}'",
                        path.display()
                    )))
                }
            }
        }
    }
    Ok(flags)
}

fn parse(argv: &[OsString]) -> std::result::Result<Cli, clap::Error> {
    Cli::try_parse_from(argv)
}

/// Parses the command line, merging a `--config` file beneath the flags.
pub fn parse_args(argv: Vec<OsString>) -> std::result::Result<Cli, CliError> {
    let cli = parse(&argv).map_err(CliError::Clap)?;
    let Some(path) = cli.command.common().config.clone() else {
        return Ok(cli);
    };
    let file_flags = config_flags(cli.command.name(), &path).map_err(CliError::Run)?;
    // File values go first so any repeated command-line flag overrides them.
    let pos = argv
        .iter()
        .position(|a| a.to_str() == Some(cli.command.name()))
        .expect("subcommand present");
    let mut merged = argv[..=pos].to_vec();
    merged.extend(file_flags);
    merged.extend_from_slice(&argv[pos + 1..]);
    parse(&merged).map_err(CliError::Clap)
}

#[derive(Debug)]
pub enum CliError {
    Clap(clap::Error),
    Run(Error),
}

/// Worker-thread count: `--jobs` if given, otherwise all cores, capped by
/// the environment variable.
pub fn thread_count(jobs: Option<usize>) -> usize {
    let default = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut n = jobs.unwrap_or(default).max(1);
    if let Some(cap) = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
    {
        n = n.min(cap.max(1));
    }
    n
}

/// Runs the CLI and returns the process exit code. Diagnostics go to
/// stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match parse_args(argv) {
        Ok(cli) => cli,
        Err(CliError::Clap(e)) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
        Err(CliError::Run(e)) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let threads = thread_count(cli.command.common().jobs);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker threads: {e}");
            return 1;
        }
    };
    match pool.install(|| commands::dispatch(&cli.command)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Usage(_) | Error::Config(_) => 2,
                _ => 1,
            }
        }
    }
}

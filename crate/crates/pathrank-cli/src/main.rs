//! Entry point: parse argv, size the thread pool, dispatch, and render any
//! failure as one `error: <category>: <detail>` line on stderr with exit
//! code 1. The dispatcher is argv-driven so `rerun` can replay a manifest
//! through exactly the same code path.

mod cli;
mod commands;
mod config;
mod manifest;

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::sync::Once;

use clap::Parser;
use pathrank::{Error, Result};

use cli::{Cli, Command};
use commands::RunCtx;

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    match run_argv(&argv, None) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (category, detail) = categorize(&err);
            eprintln!("error: {category}: {detail}");
            ExitCode::FAILURE
        }
    }
}

/// Parse and execute one argv (without the program name). `fixed_env`
/// replaces the live PATHRANK_* environment during manifest replays.
pub fn run_argv(argv: &[String], fixed_env: Option<&BTreeMap<String, String>>) -> Result<()> {
    let full = std::iter::once("pathrank".to_string()).chain(argv.iter().cloned());
    let parsed = match Cli::try_parse_from(full) {
        Ok(p) => p,
        // let clap print its usage/help/version output and pick the exit code
        Err(e) => e.exit(),
    };
    if let Some(jobs) = parsed.jobs {
        init_jobs(jobs)?;
    }
    let ctx = RunCtx { argv, fixed_env };
    match &parsed.command {
        Command::GenNetwork(args) => commands::gen_network(&ctx, args),
        Command::Paths(args) => commands::paths(&ctx, args),
        Command::GenData(args) => commands::gen_data(&ctx, args),
        Command::Embed(args) => commands::embed(&ctx, args),
        Command::Train(args) => commands::train_cmd(&ctx, args),
        Command::Rank(args) => commands::rank(&ctx, args),
        Command::Evaluate(args) => commands::evaluate_cmd(&ctx, args),
        Command::Sweep(args) => commands::sweep(&ctx, args),
        Command::Rerun(args) => commands::rerun(args),
    }
}

/// The global pool can only be sized once per process; a second --jobs on a
/// replayed argv keeps the first setting.
fn init_jobs(jobs: usize) -> Result<()> {
    if jobs == 0 {
        return Err(Error::config("jobs must be >= 1"));
    }
    static INIT: Once = Once::new();
    let mut result = Ok(());
    INIT.call_once(|| {
        result = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::config(format!("thread pool: {e}")));
    });
    result
}

/// Stable machine-parsable category plus the human detail, without the
/// library's own prefix so the line stays single-levelled.
fn categorize(err: &Error) -> (&'static str, String) {
    match err {
        Error::Io(e) if e.kind() == std::io::ErrorKind::NotFound => ("io.missing", e.to_string()),
        Error::Io(e) => ("io", e.to_string()),
        Error::Parse { line: 0, msg } => ("parse", msg.clone()),
        Error::Parse { line, msg } => ("parse", format!("line {line}: {msg}")),
        Error::Validation(msg) => ("validation", msg.clone()),
        Error::Config(msg) => ("config", msg.clone()),
        Error::NoPath { from, to } => ("no-path", format!("no path from vertex {from} to vertex {to}")),
        Error::Diverged { epoch, msg } => ("diverged", format!("epoch {epoch}: {msg}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn categories_are_stable() {
        let missing = Error::Io(std::io::Error::new(std::io::ErrorKind::NotFound, "x"));
        assert_eq!(categorize(&missing).0, "io.missing");
        assert_eq!(categorize(&Error::validation("v")).0, "validation");
        assert_eq!(categorize(&Error::config("c")).0, "config");
        assert_eq!(categorize(&Error::NoPath { from: 1, to: 2 }).0, "no-path");
        let (cat, detail) = categorize(&Error::parse(3, "bad token"));
        assert_eq!(cat, "parse");
        assert!(detail.starts_with("line 3"));
    }
}

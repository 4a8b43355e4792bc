//! Command-line front end: dataset materialization, training, attacks,
//! theory experiments and the active-learning tables.

mod al;
mod args;
pub mod config;
mod dataset;
mod error;
mod model;
mod report;
mod theory;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{CommandFactory, FromArgMatches};

pub use al::{al_markdown, execute as execute_al, AlOutput};
pub use args::Cli;
use args::{Command, DatasetCmd, TheoryCmd};
pub use error::{CliError, CliResult};
pub use report::parse_report_csv;

/// Environment variable naming the directory that holds downloaded corpora.
pub const DATA_DIR_ENV: &str = "BOUNDARYLAB_DATA_DIR";

/// `$BOUNDARYLAB_DATA_DIR`, else `./data`.
pub fn data_dir() -> PathBuf {
    std::env::var_os(DATA_DIR_ENV).map_or_else(|| PathBuf::from("data"), PathBuf::from)
}

/// Parses `args` (program name first), merges a `--config` file and runs
/// the command, writing human-readable output to `out`.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> CliResult<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let mut argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let command = Cli::command();
    let matches = match command.clone().try_get_matches_from(&argv) {
        Ok(m) => m,
        Err(e) => return clap_failure(e, out),
    };
    let cli = Cli::from_arg_matches(&matches).map_err(|e| CliError::usage(e.to_string()))?;
    let cli = match &cli.config {
        Some(path) => {
            let entries = config::read_config(path)?;
            argv.extend(config::config_tokens(&command, &matches, &entries)?);
            match command.try_get_matches_from(&argv) {
                Ok(m) => Cli::from_arg_matches(&m).map_err(|e| CliError::usage(e.to_string()))?,
                Err(e) => return clap_failure(e, out),
            }
        }
        None => cli,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::usage(format!("cannot start worker pool: {e}")))?;
    // commands write into a buffer so the worker threads never touch `out`
    let mut buf = Vec::new();
    let result = pool.install(|| dispatch(cli.command, &mut buf));
    out.write_all(&buf)?;
    result
}

fn clap_failure(e: clap::Error, out: &mut dyn Write) -> CliResult<()> {
    use clap::error::ErrorKind;
    match e.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
            write!(out, "{}", e.render())?;
            Ok(())
        }
        _ => Err(CliError::Usage(e.render().to_string())),
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> CliResult<()> {
    match command {
        Command::Dataset { cmd } => match cmd {
            DatasetCmd::Gen(a) => dataset::gen(a, out),
            DatasetCmd::Load(a) => dataset::load(a, out),
        },
        Command::Train(a) => model::train(a, out),
        Command::Attack(a) => model::attack(a, out),
        Command::Theory { cmd } => match cmd {
            TheoryCmd::BetaSweep(a) => theory::beta_sweep(a, out),
            TheoryCmd::Bounds(a) => theory::bounds(a, out),
            TheoryCmd::Verify(a) => theory::verify(a, out),
            TheoryCmd::Region(a) => theory::region(a, out),
        },
        Command::Al(a) => al::run(a, out),
        Command::Report(a) => report::run(a, out),
    }
}

/// Runs the CLI and returns the process exit code; errors go to stderr.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match run(args, out) {
        Ok(()) => 0,
        Err(e) => {
            let msg = e.to_string();
            if msg.starts_with("error:") {
                eprint!("{msg}");
            } else {
                eprintln!("error: {msg}");
            }
            e.exit_code()
        }
    }
}

/// Usage error for a flag that is neither on the command line nor in the config.
pub(crate) fn missing(path: &[&str], flag: &str) -> CliError {
    let mut cmd = Cli::command();
    cmd.build();
    let mut cur = &mut cmd;
    for name in path {
        cur = cur.find_subcommand_mut(name).expect("known subcommand");
    }
    CliError::Usage(format!(
        "error: missing required flag --{flag}\n\n{}\n\nFor more information, try '--help'.\n",
        cur.render_usage()
    ))
}

pub(crate) fn write_file(path: &Path, text: &str) -> CliResult<()> {
    Ok(boundarylab::persist::write_atomic(path, text.as_bytes())?)
}

//! `key = value` experiment files.
//!
//! Keys are the long flag names of the command being run (`-` and `_` are
//! interchangeable). A value from the file is used only when the flag is
//! absent from the command line, so precedence is flag > file > default.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::parser::ValueSource;
use clap::{ArgAction, ArgMatches, Command, ValueHint};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

/// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
pub fn parse_config(text: &str) -> CliResult<Vec<Entry>> {
    let mut out: Vec<Entry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::usage(format!("config line {}: expected `key = value`", i + 1))
        })?;
        let key = key.trim().replace('_', "-");
        if key.is_empty() {
            return Err(CliError::usage(format!("config line {}: empty key", i + 1)));
        }
        if out.iter().any(|e| e.key == key) {
            return Err(CliError::usage(format!(
                "config line {}: duplicate key `{key}`",
                i + 1
            )));
        }
        out.push(Entry {
            line: i + 1,
            key,
            value: value.trim().to_string(),
        });
    }
    Ok(out)
}

pub fn read_config(path: &Path) -> CliResult<Vec<Entry>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config(&text)
}

/// The innermost subcommand's definition and matches.
fn leaf<'a>(cmd: &'a Command, m: &'a ArgMatches) -> (&'a Command, &'a ArgMatches) {
    match m.subcommand() {
        Some((name, sub)) => match cmd.find_subcommand(name) {
            Some(c) => leaf(c, sub),
            None => (cmd, m),
        },
        None => (cmd, m),
    }
}

/// Extra command-line tokens supplying every config entry whose flag was
/// not given explicitly. Unknown keys are rejected and file-valued keys
/// must name existing files.
pub fn config_tokens(
    root: &Command,
    matches: &ArgMatches,
    entries: &[Entry],
) -> CliResult<Vec<OsString>> {
    let (cmd, m) = leaf(root, matches);
    let mut tokens = Vec::new();
    for e in entries {
        let arg = cmd
            .get_arguments()
            .chain(root.get_arguments())
            .find(|a| a.get_long() == Some(e.key.as_str()) && a.get_id() != "config")
            .ok_or_else(|| {
                CliError::usage(format!(
                    "config line {}: unknown key `{}` for `{}`",
                    e.line,
                    e.key,
                    cmd.get_name()
                ))
            })?;
        let id = arg.get_id().as_str();
        let given = m
            .try_get_raw(id)
            .ok()
            .flatten()
            .is_some_and(|_| m.value_source(id) == Some(ValueSource::CommandLine))
            || (matches.try_get_raw(id).ok().flatten().is_some()
                && matches.value_source(id) == Some(ValueSource::CommandLine));
        let flag_set = matches!(arg.get_action(), ArgAction::SetTrue)
            && (m.try_get_one::<bool>(id).ok().flatten() == Some(&true));
        if given || flag_set {
            continue;
        }
        if matches!(arg.get_action(), ArgAction::SetTrue) {
            match e.value.as_str() {
                "true" | "1" | "yes" => tokens.push(OsString::from(format!("--{}", e.key))),
                "false" | "0" | "no" => {}
                v => {
                    return Err(CliError::usage(format!(
                        "config line {}: `{}` expects true or false, got `{v}`",
                        e.line, e.key
                    )))
                }
            }
            continue;
        }
        if matches!(arg.get_value_hint(), ValueHint::FilePath) && !PathBuf::from(&e.value).is_file()
        {
            return Err(CliError::Io(format!(
                "config line {}: `{}` names a missing file `{}`",
                e.line, e.key, e.value
            )));
        }
        tokens.push(OsString::from(format!("--{}={}", e.key, e.value)));
    }
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_blanks() {
        let e = parse_config("# header\n\nn = 500  # trailing\nout_dir=results\n").unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!(
            (e[0].key.as_str(), e[0].value.as_str(), e[0].line),
            ("n", "500", 3)
        );
        assert_eq!(e[1].key, "out-dir");
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(matches!(parse_config("n 500"), Err(CliError::Usage(_))));
        assert!(matches!(parse_config("=3"), Err(CliError::Usage(_))));
        assert!(matches!(parse_config("n=1\nn=2"), Err(CliError::Usage(_))));
    }
}

//! Config-file defaults.
//!
//! The file is a flat JSON object keyed by flag name (`min_side` or
//! `min-side`). Keys belonging to the chosen subcommand, or to the global
//! flags, are turned back into command-line flags and appended after the
//! user's own arguments, but only for flags the user did not set. Clap then
//! parses and validates everything in one pass. Keys that belong only to
//! other subcommands are ignored so one file can serve every subcommand.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::parser::ValueSource;
use clap::{ArgMatches, Command};
use serde_json::Value;

use crate::error::CliError;

const GLOBALS: [&str; 2] = ["seed", "threads"];

fn set_by_user(m: &ArgMatches, id: &str) -> bool {
    m.try_contains_id(id).unwrap_or(false) && m.value_source(id) == Some(ValueSource::CommandLine)
}

fn has_arg(cmd: &Command, id: &str) -> bool {
    cmd.get_arguments().any(|a| a.get_id() == id)
}

fn render(key: &str, value: &Value) -> Result<Option<String>, CliError> {
    let scalar = |v: &Value| match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        other => Err(CliError::Usage(format!("config key {key:?}: unsupported value {other}"))),
    };
    Ok(match value {
        Value::Null | Value::Bool(false) => None,
        Value::Bool(true) => Some(String::new()),
        Value::Array(items) => Some(items.iter().map(scalar).collect::<Result<Vec<_>, _>>()?.join(",")),
        v => Some(scalar(v)?),
    })
}

/// Returns `argv` extended with flags taken from the config file named by
/// `--config` or the environment, if any.
pub fn merge_config(root: &Command, argv: Vec<OsString>, first: &ArgMatches) -> Result<Vec<OsString>, CliError> {
    let Some(path) = first.get_one::<PathBuf>("config") else {
        return Ok(argv);
    };
    let Some((name, sub)) = first.subcommand() else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    let table: serde_json::Map<String, Value> = serde_json::from_str(&text)
        .map_err(|source| CliError::Json { path: path.clone(), source })?;
    let sub_cmd = root.find_subcommand(name).expect("parsed subcommand exists");

    let mut out = argv;
    for (key, value) in &table {
        let id = key.replace('-', "_");
        let global = GLOBALS.contains(&id.as_str());
        if !global && !has_arg(sub_cmd, &id) {
            if id != "config" && root.get_subcommands().any(|c| has_arg(c, &id)) {
                continue;
            }
            return Err(CliError::Usage(format!("{}: unknown config key {key:?}", path.display())));
        }
        if set_by_user(sub, &id) || (global && set_by_user(first, &id)) {
            continue;
        }
        if let Some(v) = render(key, value)? {
            out.push(format!("--{}", id.replace('_', "-")).into());
            if !matches!(value, Value::Bool(true)) {
                out.push(v.into());
            }
        }
    }
    Ok(out)
}

//! Config files are flat TOML tables whose keys are long flag names. They
//! are turned into flag tokens placed ahead of the command-line flags, so a
//! flag given on the command line overrides the file.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use crate::io::{CliError, CliResult};

const SUBCOMMANDS: [&str; 5] = ["solve", "experiment", "diagnose", "verify-condition", "project"];

/// Value of `--config` and the index of the subcommand token, if present.
fn scan(args: &[OsString]) -> (Option<PathBuf>, Option<usize>) {
    let mut config = None;
    let mut sub = None;
    let mut i = 1;
    while i < args.len() {
        let a = args[i].to_string_lossy();
        if a == "--" {
            break;
        }
        if let Some(v) = a.strip_prefix("--config=") {
            config = Some(PathBuf::from(v));
        } else if a == "--config" {
            config = args.get(i + 1).map(PathBuf::from);
            i += 1;
        } else if a == "--threads" {
            i += 1;
        } else if sub.is_none() && SUBCOMMANDS.contains(&a.as_ref()) {
            sub = Some(i);
        }
        i += 1;
    }
    (config, sub)
}

fn value_text(key: &str, v: &toml::Value) -> CliResult<Option<String>> {
    Ok(Some(match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(f) => f.to_string(),
        toml::Value::Boolean(true) => return Ok(None),
        toml::Value::Array(items) => {
            let parts: CliResult<Vec<String>> = items
                .iter()
                .map(|it| match it {
                    toml::Value::Array(_) | toml::Value::Table(_) | toml::Value::Boolean(_) => Err(
                        CliError::Usage(format!("config key '{key}': lists must hold numbers or strings")),
                    ),
                    other => Ok(value_text(key, other)?.unwrap_or_default()),
                })
                .collect();
            parts?.join(",")
        }
        toml::Value::Boolean(false) => String::new(),
        toml::Value::Datetime(_) | toml::Value::Table(_) => {
            return Err(CliError::Usage(format!(
                "config key '{key}' must be a string, number, boolean or list"
            )))
        }
    }))
}

/// Flag tokens for every key of a flat TOML table. `false` booleans are
/// dropped.
pub fn config_tokens(text: &str, origin: &Path) -> CliResult<Vec<OsString>> {
    let table: toml::Table = text
        .parse()
        .map_err(|e| CliError::Usage(format!("{}: {e}", origin.display())))?;
    let mut out = Vec::new();
    for (key, value) in &table {
        if key == "config" {
            return Err(CliError::Usage(format!("{}: config files cannot nest", origin.display())));
        }
        let flag = format!("--{}", key.replace('_', "-"));
        if matches!(value, toml::Value::Boolean(false)) {
            continue;
        }
        match value_text(key, value)? {
            None => out.push(OsString::from(flag)),
            Some(v) => out.push(OsString::from(format!("{flag}={v}"))),
        }
    }
    Ok(out)
}

/// The command line with config-file tokens spliced in right after the
/// subcommand.
pub fn merged_args(args: Vec<OsString>) -> CliResult<Vec<OsString>> {
    let (config, sub) = scan(&args);
    let Some(path) = config else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let tokens = config_tokens(&text, &path)?;
    let at = sub.map_or(args.len(), |i| i + 1);
    let mut out = args[..at].to_vec();
    let (global, local): (Vec<_>, Vec<_>) = tokens
        .into_iter()
        .partition(|t| t.to_string_lossy().starts_with("--threads"));
    let insert_global = sub.unwrap_or(at);
    out.splice(insert_global..insert_global, global);
    out.extend(local);
    out.extend_from_slice(&args[at..]);
    Ok(out)
}

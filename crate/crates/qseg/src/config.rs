//! TOML configuration files.
//!
//! Top-level keys set global flags and a table named after a command sets
//! that command's flags. Keys are flag names with `-` or `_`:
//!
//! ```toml
//! seed = 7
//! shots = 0
//!
//! [pipeline-run]
//! gate_model = "models/gate.json"
//! segment-model = "models/segment.json"
//! aspect_threshold = 2.5
//! ```
//!
//! Every entry becomes a command-line token placed before the user's own
//! flags, and a repeated flag keeps its last value, so flags given on the
//! command line win over the file. Unknown keys fail like unknown flags.

use std::ffi::OsString;
use std::path::Path;

use thiserror::Error;
use toml::Value;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}: cannot read: {1}")]
    Read(String, std::io::Error),
    #[error("{0}: {1}")]
    Parse(String, toml::de::Error),
    #[error("{0}: `{1}` cannot be set from a config file")]
    Forbidden(String, String),
    #[error("{0}: key `{1}` has an unsupported value")]
    BadValue(String, String),
}

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Integer(i) => Some(i.to_string()),
        Value::Float(f) => Some(f.to_string()),
        _ => None,
    }
}

fn push_entry(name: &str, key: &str, value: &Value, out: &mut Vec<OsString>) -> Result<(), ConfigError> {
    let flag = format!("--{}", key.replace('_', "-"));
    if flag == "--config" {
        return Err(ConfigError::Forbidden(name.into(), key.into()));
    }
    let bad = || ConfigError::BadValue(name.into(), key.into());
    match value {
        Value::Boolean(true) => out.push(flag.into()),
        Value::Boolean(false) => {}
        Value::Array(items) => {
            let parts = items.iter().map(scalar).collect::<Option<Vec<_>>>().ok_or_else(bad)?;
            out.push(flag.into());
            out.push(parts.join(",").into());
        }
        v => {
            out.push(flag.into());
            out.push(scalar(v).ok_or_else(bad)?.into());
        }
    }
    Ok(())
}

/// Flag tokens for `command` from the TOML text of a config file.
/// `commands` lists every valid section name.
pub fn tokens_from_str(text: &str, name: &str, command: &str, commands: &[&str]) -> Result<Vec<OsString>, ConfigError> {
    let table: toml::Table = toml::from_str(text).map_err(|e| ConfigError::Parse(name.into(), e))?;
    let mut global = Vec::new();
    let mut local = Vec::new();
    for (key, value) in &table {
        match value {
            Value::Table(section) if commands.contains(&key.as_str()) => {
                if key == command {
                    for (k, v) in section {
                        push_entry(name, k, v, &mut local)?;
                    }
                }
            }
            Value::Table(_) => return Err(ConfigError::BadValue(name.into(), key.clone())),
            v => push_entry(name, key, v, &mut global)?,
        }
    }
    global.extend(local);
    Ok(global)
}

pub fn tokens_from_file(path: &Path, command: &str, commands: &[&str]) -> Result<Vec<OsString>, ConfigError> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read(name.clone(), e))?;
    tokens_from_str(&text, &name, command, commands)
}

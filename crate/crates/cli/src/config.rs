//! Configuration plumbing shared by all subcommands: JSON config file,
//! `SOCNAV_`-prefixed environment overrides, and command-line flags, merged
//! in that order so flags always win.

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};
use std::fmt;
use std::fs;
use std::path::Path;

#[derive(Debug)]
pub enum CliError {
    /// Usage or configuration problem; exit code 1.
    Config(String),
    /// Failure while executing a valid request; exit code 2.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) | CliError::Runtime(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for CliError {}

/// Resolves the effective options for one subcommand. `flags` is the
/// clap-parsed struct; every `None` falls through to the environment, then
/// to the config file.
pub fn resolve<C>(config_path: Option<&Path>, flags: &C) -> Result<C, CliError>
where
    C: Serialize + DeserializeOwned + Default,
{
    let mut merged = match config_path {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                CliError::Config(format!("cannot read config {}: {e}", path.display()))
            })?;
            match serde_json::from_str::<Value>(&text) {
                Ok(Value::Object(map)) => map,
                Ok(_) => {
                    return Err(CliError::Config(format!(
                        "config {} must be a JSON object",
                        path.display()
                    )))
                }
                Err(e) => {
                    return Err(CliError::Config(format!(
                        "config {} is not valid JSON: {e}",
                        path.display()
                    )))
                }
            }
        }
        None => Map::new(),
    };

    // environment overrides: SOCNAV_<KEY> for every known key
    let keys: Vec<String> = match serde_json::to_value(C::default()) {
        Ok(Value::Object(map)) => map.keys().cloned().collect(),
        _ => Vec::new(),
    };
    for key in &keys {
        let var = format!("SOCNAV_{}", key.to_uppercase());
        if let Ok(raw) = std::env::var(&var) {
            let value = serde_json::from_str::<Value>(&raw).unwrap_or(Value::String(raw));
            merged.insert(key.clone(), value);
        }
    }

    // explicit flags win over everything
    if let Value::Object(map) =
        serde_json::to_value(flags).map_err(|e| CliError::Config(e.to_string()))?
    {
        for (key, value) in map {
            if !value.is_null() {
                merged.insert(key, value);
            }
        }
    }

    serde_json::from_value(Value::Object(merged))
        .map_err(|e| CliError::Config(format!("invalid configuration: {e}")))
}

/// Missing-required-option error.
pub fn require<T>(opt: Option<T>, name: &str) -> Result<T, CliError> {
    opt.ok_or_else(|| CliError::Config(format!("missing required option `{name}`")))
}

/// Writes via a temporary sibling and renames, so readers never observe a
/// partial file.
pub fn write_atomic(path: &Path, content: &str) -> Result<(), CliError> {
    let tmp = path.with_extension(match path.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{ext}.tmp"),
        None => "tmp".to_string(),
    });
    fs::write(&tmp, content)
        .and_then(|()| fs::rename(&tmp, path))
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

pub fn read_to_string(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}

//! Flag/config-file merging. Every subcommand's flags mirror the keys of
//! its TOML config file; a flag given on the command line wins.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::{CliError, CliResult};

fn strip_unset(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m
            .into_iter()
            .filter(|(_, v)| !v.is_null() && !matches!(v, Value::Array(a) if a.is_empty()))
            .collect(),
        _ => Map::new(),
    }
}

/// Reads a TOML config file into a JSON object, rebasing the relative
/// paths under `path_keys` onto the file's directory.
pub fn read_config_file(path: &Path, path_keys: &[&str]) -> CliResult<Map<String, Value>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::MissingInput {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let table: toml::Table =
        toml::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
    let mut map = match serde_json::to_value(table).map_err(|e| CliError::Invalid(e.to_string()))? {
        Value::Object(m) => m,
        _ => Map::new(),
    };
    let base = path.parent().unwrap_or(Path::new("."));
    for key in path_keys {
        if let Some(Value::String(s)) = map.get_mut(*key) {
            if Path::new(s.as_str()).is_relative() {
                *s = base.join(&*s).display().to_string();
            }
        }
    }
    Ok(map)
}

/// Merges `flags` over the optional config file and deserializes the
/// result. Returns the merged settings and their JSON snapshot.
pub fn resolve<T: Serialize + DeserializeOwned>(
    flags: &T,
    config: Option<&PathBuf>,
    path_keys: &[&str],
) -> CliResult<(T, Value)> {
    let mut merged = match config {
        Some(p) => read_config_file(p, path_keys)?,
        None => Map::new(),
    };
    let given =
        strip_unset(serde_json::to_value(flags).map_err(|e| CliError::Invalid(e.to_string()))?);
    merged.extend(given);
    merged.remove("config");
    let snapshot = Value::Object(merged);
    let settings =
        serde_json::from_value(snapshot.clone()).map_err(|e| CliError::Invalid(e.to_string()))?;
    Ok((settings, snapshot))
}

pub fn required<T: Clone>(v: &Option<T>, key: &str) -> CliResult<T> {
    v.clone()
        .ok_or_else(|| CliError::MissingKey(key.to_string()))
}

/// An input path that must exist.
pub fn input_path(p: &Path) -> CliResult<PathBuf> {
    if p.exists() {
        Ok(p.to_path_buf())
    } else {
        Err(CliError::MissingInput {
            path: p.display().to_string(),
            reason: "no such file or directory".into(),
        })
    }
}

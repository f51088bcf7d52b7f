//! Flat key=value configuration with flag override semantics.
//!
//! Each command resolves a setting as: explicit command-line flag, else the
//! config file entry, else the built-in default. Lines starting with `#` and
//! blank lines are ignored.

use std::collections::HashMap;
use std::path::Path;

use tenfos_core::{Error, Result};

#[derive(Debug, Default)]
pub struct Config {
    values: HashMap<String, String>,
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Config> {
        let Some(path) = path else {
            return Ok(Config::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::invalid_data(format!("cannot read config {}: {e}", path.display()))
        })?;
        let mut values = HashMap::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::invalid_data(format!(
                    "{}:{}: expected key=value, got '{line}'",
                    path.display(),
                    ln + 1
                ))
            })?;
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Config { values })
    }

    /// Flag wins, then config, then default.
    pub fn resolve<T: std::str::FromStr + Clone>(
        &self,
        flag: Option<T>,
        key: &str,
        default: T,
    ) -> Result<T> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.values.get(key) {
            Some(raw) => raw.parse().map_err(|_| {
                Error::invalid_argument(format!("config key '{key}' has bad value '{raw}'"))
            }),
            None => Ok(default),
        }
    }

    /// Flag wins, then config; `None` when neither is present.
    pub fn resolve_opt<T: std::str::FromStr>(
        &self,
        flag: Option<T>,
        key: &str,
    ) -> Result<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            Some(raw) => raw.parse().map(Some).map_err(|_| {
                Error::invalid_argument(format!("config key '{key}' has bad value '{raw}'"))
            }),
            None => Ok(None),
        }
    }
}

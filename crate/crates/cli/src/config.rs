//! Flat key-value run configuration with CLI > config file > default
//! precedence and a reproducible echo.
//!
//! The echo printed by every subcommand is itself a valid config file:
//! feeding it back through `--config` replays the run bit-identically.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use udfront_core::{Error, Result};

#[derive(Debug, Default)]
pub struct ConfigBag {
    file: BTreeMap<String, String>,
    resolved: BTreeMap<String, String>,
}

impl ConfigBag {
    pub fn load(path: Option<&Path>, subcommand: &str) -> Result<Self> {
        let mut file = BTreeMap::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)?;
            for (lineno, raw) in text.lines().enumerate() {
                let line = raw.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    Error::format(format!("config line {}: expected 'key = value'", lineno + 1))
                })?;
                file.insert(key.trim().to_string(), value.trim().to_string());
            }
            if let Some(sub) = file.remove("subcommand") {
                if sub != subcommand {
                    return Err(Error::invalid(format!(
                        "config is for subcommand '{sub}', not '{subcommand}'"
                    )));
                }
            }
        }
        Ok(Self {
            file,
            resolved: BTreeMap::new(),
        })
    }

    /// Resolve one key: CLI value, then config file, then default.
    pub fn resolve<T>(&mut self, key: &str, cli: Option<T>, default: T) -> Result<T>
    where
        T: FromStr + Display,
    {
        let value = match cli {
            Some(v) => v,
            None => match self.file.get(key) {
                Some(raw) => raw
                    .parse::<T>()
                    .map_err(|_| Error::format(format!("config key '{key}': bad value '{raw}'")))?,
                None => default,
            },
        };
        self.resolved.insert(key.to_string(), value.to_string());
        Ok(value)
    }

    /// Resolve an optional key with no default.
    pub fn resolve_opt<T>(&mut self, key: &str, cli: Option<T>) -> Result<Option<T>>
    where
        T: FromStr + Display,
    {
        let value = match cli {
            Some(v) => Some(v),
            None => match self.file.get(key) {
                Some(raw) if !raw.is_empty() => Some(raw.parse::<T>().map_err(|_| {
                    Error::format(format!("config key '{key}': bad value '{raw}'"))
                })?),
                _ => None,
            },
        };
        if let Some(v) = &value {
            self.resolved.insert(key.to_string(), v.to_string());
        }
        Ok(value)
    }

    /// Resolve a repeatable path list; stored comma-separated.
    pub fn resolve_list(&mut self, key: &str, cli: &[String]) -> Result<Vec<String>> {
        let values: Vec<String> = if !cli.is_empty() {
            cli.to_vec()
        } else {
            match self.file.get(key) {
                Some(raw) if !raw.is_empty() => {
                    raw.split(',').map(|s| s.trim().to_string()).collect()
                }
                _ => Vec::new(),
            }
        };
        if !values.is_empty() {
            self.resolved.insert(key.to_string(), values.join(","));
        }
        Ok(values)
    }

    /// The resolved configuration in replayable form.
    pub fn echo(&self, subcommand: &str) -> String {
        let mut out = format!("subcommand = {subcommand}\n");
        for (k, v) in &self.resolved {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }
}

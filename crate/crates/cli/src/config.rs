//! Flat key=value run configuration.
//!
//! One `key = value` pair per line, `#` comments, no sections; lists are
//! comma-separated.  Every command declares its allowed keys, so typos
//! fail loudly instead of silently running defaults.

use std::collections::BTreeMap;
use std::path::Path;

use crate::Failure;

#[derive(Debug, Default)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Config, Failure> {
        let Some(path) = path else {
            return Ok(Config::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::validation(format!("cannot read {}: {e}", path.display())))?;
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Failure::validation(format!(
                    "{}:{}: expected key = value, got `{line}`",
                    path.display(),
                    lineno + 1
                )));
            };
            let key = key.trim().to_string();
            if entries.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(Failure::validation(format!(
                    "{}:{}: duplicate key `{key}`",
                    path.display(),
                    lineno + 1
                )));
            }
        }
        Ok(Config { entries })
    }

    /// Merge command-line KEY=VALUE pairs over the file contents.
    pub fn apply_overrides(&mut self, pairs: &[String]) -> Result<(), Failure> {
        for pair in pairs {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| Failure::validation(format!("override `{pair}` is not KEY=VALUE")))?;
            self.entries
                .insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(())
    }

    /// Reject keys the command does not understand.
    pub fn allow_only(&self, allowed: &[&str]) -> Result<(), Failure> {
        for key in self.entries.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(Failure::validation(format!(
                    "unknown config key `{key}`; allowed: {}",
                    allowed.join(", ")
                )));
            }
        }
        Ok(())
    }

    pub fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.entries.get(key).map_or(default, |s| s.as_str())
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, Failure> {
        match self.entries.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Failure::validation(format!("key `{key}`: not a number: `{v}`"))),
        }
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64, Failure> {
        match self.entries.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Failure::validation(format!("key `{key}`: not an integer: `{v}`"))),
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, Failure> {
        Ok(self.u64_or(key, default as u64)? as usize)
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool, Failure> {
        match self.entries.get(key).map(|s| s.as_str()) {
            None => Ok(default),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(v) => Err(Failure::validation(format!(
                "key `{key}`: expected true or false, got `{v}`"
            ))),
        }
    }

    pub fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>, Failure> {
        self.entries
            .get(key)
            .map(|v| {
                v.split(',')
                    .map(|x| {
                        x.trim().parse().map_err(|_| {
                            Failure::validation(format!("key `{key}`: bad number `{x}`"))
                        })
                    })
                    .collect()
            })
            .transpose()
    }

    pub fn i64_list(&self, key: &str) -> Result<Option<Vec<i64>>, Failure> {
        self.entries
            .get(key)
            .map(|v| {
                v.split(',')
                    .map(|x| {
                        x.trim().parse().map_err(|_| {
                            Failure::validation(format!("key `{key}`: bad integer `{x}`"))
                        })
                    })
                    .collect()
            })
            .transpose()
    }

    pub fn usize_list_or(&self, key: &str, default: &[usize]) -> Result<Vec<usize>, Failure> {
        match self.entries.get(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(|x| {
                    x.trim().parse().map_err(|_| {
                        Failure::validation(format!("key `{key}`: bad integer `{x}`"))
                    })
                })
                .collect(),
        }
    }
}

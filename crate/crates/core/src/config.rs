//! Flat `key=value` text files (training configs, synthetic specs).

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Result, SpamsError};
use crate::io_util;

#[derive(Debug, Clone, Default)]
pub struct KvConfig {
    source: String,
    entries: BTreeMap<String, String>,
}

impl KvConfig {
    pub fn parse(source: &str, text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| SpamsError::Parse {
                source_name: source.to_string(),
                row: i + 1,
                message: format!("expected key=value, got {line:?}"),
            })?;
            let key = k.trim().to_string();
            if entries.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(SpamsError::Parse {
                    source_name: source.to_string(),
                    row: i + 1,
                    message: format!("duplicate key {key:?}"),
                });
            }
        }
        Ok(KvConfig {
            source: source.to_string(),
            entries,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = io_util::read_to_string(path)?;
        Self::parse(&path.display().to_string(), &text)
    }

    /// Rejects keys outside `allowed`.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        for k in self.entries.keys() {
            if !allowed.contains(&k.as_str()) {
                return Err(SpamsError::Config(format!(
                    "{}: unknown key {k:?} (allowed: {})",
                    self.source,
                    allowed.join(", ")
                )));
            }
        }
        Ok(())
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| {
                SpamsError::Config(format!("{}: cannot parse {key}={v:?}", self.source))
            }),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }
}

//! Flat `key = value` experiment manifests.
//!
//! Grammar: one `key = value` pair per line; `#` starts a comment; blank
//! lines are ignored; lists are written `[a, b, c]` (brackets optional).
//! Keys use the same kebab-case names as the long command-line flags, and a
//! flag given on the command line always wins over the manifest.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use wnsf::{Error, Result};

#[derive(Debug, Default)]
pub struct FileConfig {
    entries: BTreeMap<String, String>,
}

impl FileConfig {
    /// Load a manifest, or an empty one when no path was given.
    pub fn load_opt(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => Self::parse(&std::fs::read_to_string(p)?),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::InvalidArgument(format!(
                    "config line {}: expected `key = value`, got {raw:?}",
                    idx + 1
                )));
            };
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || value.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "config line {}: empty key or value",
                    idx + 1
                )));
            }
            if entries.insert(key.to_string(), value.to_string()).is_some() {
                return Err(Error::InvalidArgument(format!(
                    "config line {}: duplicate key {key:?}",
                    idx + 1
                )));
            }
        }
        Ok(Self { entries })
    }

    /// Reject manifests containing keys the current command does not accept,
    /// so typos fail loudly instead of being silently ignored.
    pub fn expect_keys(&self, allowed: &[&str]) -> Result<()> {
        for key in self.entries.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(Error::InvalidArgument(format!(
                    "unknown config key {key:?}; this command accepts: {}",
                    allowed.join(", ")
                )));
            }
        }
        Ok(())
    }

    pub fn string(&self, key: &str) -> Option<String> {
        self.entries.get(key).cloned()
    }

    pub fn scalar<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| {
                Error::InvalidArgument(format!(
                    "config key {key:?}: cannot parse {v:?} as {}",
                    short_type::<T>()
                ))
            }),
        }
    }

    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(v) => parse_list(v, key).map(Some),
        }
    }
}

/// Parse a list value: `[a, b, c]` or bare `a,b,c`; a single scalar is a
/// one-element list.
pub fn parse_list<T: FromStr>(text: &str, what: &str) -> Result<Vec<T>> {
    let t = text.trim();
    let inner = match t.strip_prefix('[') {
        Some(rest) => rest.strip_suffix(']').ok_or_else(|| {
            Error::InvalidArgument(format!("{what}: unclosed `[` in {text:?}"))
        })?,
        None => t,
    };
    let mut out = Vec::new();
    for item in inner.split(',') {
        let item = item.trim();
        if item.is_empty() {
            continue;
        }
        out.push(item.parse().map_err(|_| {
            Error::InvalidArgument(format!(
                "{what}: cannot parse {item:?} as {}",
                short_type::<T>()
            ))
        })?);
    }
    if out.is_empty() {
        return Err(Error::InvalidArgument(format!("{what}: list is empty")));
    }
    Ok(out)
}

fn short_type<T>() -> &'static str {
    std::any::type_name::<T>().rsplit("::").next().unwrap_or("value")
}

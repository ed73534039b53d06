//! Layered option resolution for the config-file commands: a command-line
//! flag beats a `PATHRANK_<KEY>` environment variable, which beats a
//! `key = value` config file line, which beats the built-in default.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use pathrank::{Error, Result};

/// One resolved source of key/value pairs plus the environment snapshot that
/// applied when it was built. The snapshot goes into the run manifest so a
/// rerun sees the same overrides even if the process environment changed.
#[derive(Debug)]
pub struct Layers {
    file: BTreeMap<String, String>,
    env: BTreeMap<String, String>,
}

fn env_key(key: &str) -> String {
    format!("PATHRANK_{}", key.to_uppercase())
}

/// Capture every PATHRANK_* variable relevant to `allowed` from the process
/// environment, or reuse a manifest snapshot when rerunning.
pub fn env_snapshot(
    allowed: &[&str],
    fixed: Option<&BTreeMap<String, String>>,
) -> BTreeMap<String, String> {
    match fixed {
        Some(map) => map.clone(),
        None => allowed
            .iter()
            .filter_map(|key| {
                let var = env_key(key);
                std::env::var(&var).ok().map(|v| (var, v))
            })
            .collect(),
    }
}

impl Layers {
    /// Parse `path` (when given) and pair it with `env`. Unknown keys,
    /// duplicate keys, and junk lines are config errors; references to keys
    /// outside `allowed` in the environment snapshot are ignored because the
    /// snapshot is already filtered.
    pub fn new(
        path: Option<&Path>,
        allowed: &[&str],
        env: BTreeMap<String, String>,
    ) -> Result<Self> {
        let mut file = BTreeMap::new();
        if let Some(path) = path {
            let text = fs::read_to_string(path)?;
            for (idx, raw) in text.lines().enumerate() {
                let line = match raw.find('#') {
                    Some(pos) => &raw[..pos],
                    None => raw,
                }
                .trim();
                if line.is_empty() {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    Error::parse(idx + 1, format!("expected key = value, got {raw:?}"))
                })?;
                let key = key.trim().to_string();
                let value = value.trim().to_string();
                if !allowed.contains(&key.as_str()) {
                    return Err(Error::config(format!(
                        "unknown config key {key:?} (line {})",
                        idx + 1
                    )));
                }
                if file.insert(key.clone(), value).is_some() {
                    return Err(Error::config(format!(
                        "duplicate config key {key:?} (line {})",
                        idx + 1
                    )));
                }
            }
        }
        Ok(Layers { file, env })
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.env
            .get(&env_key(key))
            .or_else(|| self.file.get(key))
            .map(String::as_str)
    }

    fn parse<T>(&self, key: &str, raw: &str) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        raw.parse()
            .map_err(|e| Error::config(format!("key {key:?}: cannot parse {raw:?}: {e}")))
    }

    /// Flag, then env, then file, then `default`.
    pub fn get_or<T>(&self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.get_opt(key, flag)?.unwrap_or(default))
    }

    /// Flag, then env, then file; None when absent everywhere.
    pub fn get_opt<T>(&self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.raw(key) {
            Some(raw) => Ok(Some(self.parse(key, raw)?)),
            None => Ok(None),
        }
    }

    /// Like get_opt but the key must resolve somewhere.
    pub fn get_req<T>(&self, key: &str, flag: Option<T>) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.get_opt(key, flag)?.ok_or_else(|| {
            Error::config(format!(
                "missing required key {key:?} (flag, PATHRANK_{}, or config file)",
                key.to_uppercase()
            ))
        })
    }
}

/// "0.7,0.1,0.2" style split fractions.
pub fn parse_fractions(raw: &str) -> Result<(f64, f64, f64)> {
    let parts: Vec<&str> = raw.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(Error::config(format!(
            "split {raw:?} must be three comma-separated fractions"
        )));
    }
    let mut out = [0.0; 3];
    for (slot, part) in out.iter_mut().zip(&parts) {
        *slot = part
            .parse()
            .map_err(|e| Error::config(format!("split fraction {part:?}: {e}")))?;
    }
    Ok((out[0], out[1], out[2]))
}

/// Comma-separated list parsed element-wise.
pub fn parse_list<T>(key: &str, raw: &str) -> Result<Vec<T>>
where
    T: FromStr,
    T::Err: Display,
{
    let mut out = Vec::new();
    for part in raw.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        out.push(
            part.parse()
                .map_err(|e| Error::config(format!("key {key:?}: cannot parse {part:?}: {e}")))?,
        );
    }
    if out.is_empty() {
        return Err(Error::config(format!("key {key:?}: empty list")));
    }
    Ok(out)
}

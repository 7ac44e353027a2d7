//! Flat key=value run configuration. A config file supplies defaults, and
//! every command-line flag overrides its key; the effective settings are
//! hashed into each emitted artifact so a report names the exact
//! configuration that produced it.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use crate::CliError;

/// Parsed config file: `key = value` lines, `#` comments and blank lines
/// skipped. Keys use the same spelling as the long command-line flags.
#[derive(Debug, Default, Clone)]
pub struct KvConfig {
    entries: BTreeMap<String, String>,
}

impl KvConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!(
                    "{origin}:{}: expected 'key = value', got '{line}'",
                    idx + 1
                ))
            })?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(CliError::Usage(format!("{origin}:{}: empty key", idx + 1)));
            }
            if entries
                .insert(key.clone(), value.trim().to_string())
                .is_some()
            {
                return Err(CliError::Usage(format!(
                    "{origin}:{}: duplicate key '{key}'",
                    idx + 1
                )));
            }
        }
        Ok(KvConfig { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }
}

/// The effective settings of one run: every resolved key, in deterministic
/// order. Feeds the config hash and the artifact headers.
#[derive(Debug, Default, Clone)]
pub struct Effective {
    values: BTreeMap<String, String>,
}

impl Effective {
    pub fn record(&mut self, key: &str, value: impl Display) {
        self.values.insert(key.to_string(), value.to_string());
    }

    /// Stable fingerprint of the settings that shape the output. The output
    /// directory is deliberately excluded: writing the same run somewhere
    /// else must still produce byte-identical artifacts.
    pub fn hash(&self) -> String {
        let mut canon = String::new();
        for (key, value) in &self.values {
            if key == "out-dir" {
                continue;
            }
            canon.push_str(key);
            canon.push('=');
            canon.push_str(value);
            canon.push('\n');
        }
        format!("{:016x}", coconet::stable_hash(canon.as_bytes()))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }
}

/// Resolve one setting: explicit flag beats config-file key beats default.
/// Records the winner in `effective`.
pub fn resolve<T>(
    flag: Option<T>,
    config: &KvConfig,
    key: &str,
    default: T,
    effective: &mut Effective,
) -> Result<T, CliError>
where
    T: FromStr + Display,
{
    let value = match flag {
        Some(v) => v,
        None => match config.get(key) {
            Some(raw) => raw.parse::<T>().map_err(|_| {
                CliError::Usage(format!("config key '{key}': cannot parse '{raw}'"))
            })?,
            None => default,
        },
    };
    effective.record(key, &value);
    Ok(value)
}

/// Resolve a setting with no default: required from flag or config file.
pub fn resolve_required(
    flag: Option<String>,
    config: &KvConfig,
    key: &str,
    effective: &mut Effective,
) -> Result<String, CliError> {
    let value = flag
        .or_else(|| config.get(key).map(str::to_string))
        .ok_or_else(|| {
            CliError::Usage(format!(
                "missing required setting '{key}' (pass --{key} or put it in the config file)"
            ))
        })?;
    effective.record(key, &value);
    Ok(value)
}

/// Resolve an optional setting: flag, then config file, else absent.
pub fn resolve_optional(
    flag: Option<String>,
    config: &KvConfig,
    key: &str,
    effective: &mut Effective,
) -> Option<String> {
    let value = flag.or_else(|| config.get(key).map(str::to_string));
    if let Some(v) = &value {
        effective.record(key, v);
    }
    value
}

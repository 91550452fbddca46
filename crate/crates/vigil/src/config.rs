//! Flat sectioned key-value run configuration.
//!
//! The format is deliberately plain: `[section]` headers, `key = value`
//! lines, `#` comments. Unknown sections or keys are rejected, and every
//! command echoes its fully resolved configuration next to its outputs so a
//! run can be reproduced from its artifacts alone.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{CliError, Result};

/// Parsed `section.key -> value` map.
#[derive(Debug, Clone, Default)]
pub struct KvConfig {
    entries: BTreeMap<(String, String), String>,
}

impl KvConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| CliError::usage(format!("line {}: unclosed section header", lineno + 1)))?;
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::usage(format!("line {}: expected key = value", lineno + 1)))?;
            if section.is_empty() {
                return Err(CliError::usage(format!(
                    "line {}: key outside any [section]",
                    lineno + 1
                )));
            }
            entries.insert(
                (section.clone(), key.trim().to_string()),
                value.trim().to_string(),
            );
        }
        Ok(KvConfig { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&crate::fsutil::read_text(path)?)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.entries
            .get(&(section.to_string(), key.to_string()))
            .map(|s| s.as_str())
    }

    /// Rejects any entry not present in the allow list.
    pub fn check_known(&self, known: &[(&str, &[&str])]) -> Result<()> {
        for (section, key) in self.entries.keys() {
            let ok = known
                .iter()
                .any(|(s, keys)| s == section && keys.contains(&key.as_str()));
            if !ok {
                return Err(CliError::usage(format!(
                    "unknown config key '{section}.{key}'"
                )));
            }
        }
        Ok(())
    }
}

/// Typed accessors with uniform error messages.
pub fn parse_value<T: std::str::FromStr>(section: &str, key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| CliError::usage(format!("config key '{section}.{key}': bad value '{value}'")))
}

pub fn parse_list<T: std::str::FromStr>(section: &str, key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(|s| parse_value(section, key, s.trim()))
        .collect()
}

/// Serializes a resolved configuration echo: sorted sections and keys.
pub fn render_echo(title: &str, sections: &[(&str, Vec<(String, String)>)]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# resolved configuration: {title}");
    for (name, entries) in sections {
        let _ = writeln!(out, "[{name}]");
        let mut sorted = entries.clone();
        sorted.sort();
        for (k, v) in sorted {
            let _ = writeln!(out, "{k} = {v}");
        }
    }
    out
}

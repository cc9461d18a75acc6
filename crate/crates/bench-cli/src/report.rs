//! Flat `key=value` report files.
//!
//! One entry per line, keys unique, `#` starts a comment line. Floats are
//! written in shortest round-trip form so parsing gives back the exact value.
//! See the README for the key schema.

use std::fmt::Display;
use std::path::Path;

pub const REPORT_FORMAT_VERSION: u32 = 1;

/// Keys whose values depend on the wall clock.
pub fn is_timing_key(key: &str) -> bool {
    key.ends_with("train_seconds")
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvReport {
    entries: Vec<(String, String)>,
}

impl KvReport {
    pub fn new() -> Self {
        let mut report = Self::default();
        report.push("format_version", REPORT_FORMAT_VERSION);
        report
    }

    /// Appends an entry; panics on a duplicate key since that is a
    /// programming error in the writer.
    pub fn push(&mut self, key: impl Into<String>, value: impl Display) {
        let key = key.into();
        assert!(self.get(&key).is_none(), "duplicate report key {key}");
        let value = value.to_string();
        debug_assert!(!key.contains('=') && !key.contains('\n') && !value.contains('\n'));
        self.entries.push((key, value));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    /// Rendering without wall-clock entries; equal for reproducible runs.
    pub fn render_without_timing(&self) -> String {
        let mut copy = self.clone();
        copy.entries.retain(|(k, _)| !is_timing_key(k));
        copy.render()
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut report = Self::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key=value", lineno + 1))?;
            let k = k.trim();
            if k.is_empty() {
                return Err(format!("line {}: empty key", lineno + 1));
            }
            if report.get(k).is_some() {
                return Err(format!("line {}: duplicate key '{k}'", lineno + 1));
            }
            report.entries.push((k.to_string(), v.trim().to_string()));
        }
        match report.get("format_version") {
            Some(v) if v == REPORT_FORMAT_VERSION.to_string() => Ok(report),
            Some(v) => Err(format!(
                "unsupported report format_version {v} (expected {REPORT_FORMAT_VERSION})"
            )),
            None => Err("missing format_version".into()),
        }
    }

    pub fn read(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn require(&self, key: &str) -> Result<&str, String> {
        self.get(key).ok_or_else(|| format!("missing key '{key}'"))
    }

    pub fn require_f64(&self, key: &str) -> Result<f64, String> {
        let v = self.require(key)?;
        v.parse()
            .map_err(|_| format!("key '{key}': '{v}' is not a number"))
    }
}

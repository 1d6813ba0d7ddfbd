//! Line-oriented `key=value` configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Keys are dotted
//! paths (`sensor.pulse_width`, `material.wood.tail_gain`, `tcn.iterations`).
//! Entry order is preserved so that the text form is stable and can be
//! hashed or echoed into run directories.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::str::FromStr;

use crate::{Error, Result};

/// The checked-in default configuration.
pub const DEFAULT_CONFIG: &str = include_str!("../config/default.conf");

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct KvConfig {
    entries: Vec<(String, String)>,
}

impl KvConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = KvConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                line: n + 1,
                message: format!("expected key=value, got {line:?}"),
            })?;
            let key = key.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(Error::Config {
                    line: n + 1,
                    message: format!("malformed key {key:?}"),
                });
            }
            cfg.set(key, value.trim());
        }
        Ok(cfg)
    }

    /// The embedded default configuration.
    pub fn builtin() -> Self {
        Self::parse(DEFAULT_CONFIG).expect("embedded default config parses")
    }

    /// Inserts or replaces `key`.
    pub fn set(&mut self, key: &str, value: &str) {
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value.to_string(),
            None => self.entries.push((key.to_string(), value.to_string())),
        }
    }

    /// Applies every entry of `other` on top of `self`.
    pub fn merge(&mut self, other: &KvConfig) {
        for (k, v) in &other.entries {
            self.set(k, v);
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Typed lookup; a missing key is an error.
    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.get(key).ok_or_else(|| Error::param(key, "missing"))?;
        raw.parse()
            .map_err(|_| Error::param(key, format!("cannot parse {raw:?}")))
    }

    /// Typed lookup with a fallback when the key is absent.
    pub fn get_or<T: FromStr>(&self, key: &str, fallback: T) -> Result<T> {
        match self.get(key) {
            None => Ok(fallback),
            Some(_) => self.require(key),
        }
    }

    /// Comma-separated list.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        let Some(raw) = self.get(key) else {
            return Ok(None);
        };
        raw.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse()
                    .map_err(|_| Error::param(key, format!("cannot parse list item {s:?}")))
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    /// Distinct names `x` appearing in keys of the form `<prefix>.x.<field>`,
    /// in first-appearance order.
    pub fn sections(&self, prefix: &str) -> Vec<String> {
        let mut names: Vec<String> = Vec::new();
        for (k, _) in &self.entries {
            let Some(rest) = k.strip_prefix(prefix).and_then(|r| r.strip_prefix('.')) else {
                continue;
            };
            if let Some((name, _)) = rest.split_once('.') {
                if !names.iter().any(|n| n == name) {
                    names.push(name.to_string());
                }
            }
        }
        names
    }

    /// Canonical text form, one `key=value` per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_overrides() {
        let mut cfg = KvConfig::parse("# c\na=1\n\nb.c = 2.5\na=3\n").unwrap();
        assert_eq!(cfg.require::<u32>("a").unwrap(), 3);
        assert_eq!(cfg.require::<f64>("b.c").unwrap(), 2.5);
        cfg.set("b.c", "4");
        assert_eq!(cfg.to_text(), "a=3\nb.c=4\n");
        assert!(cfg.require::<f64>("zz").is_err());
        assert_eq!(cfg.get_or("zz", 7u8).unwrap(), 7);
    }

    #[test]
    fn rejects_garbage_with_line_number() {
        let err = KvConfig::parse("a=1\nnot a pair\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 2, .. }));
    }

    #[test]
    fn sections_in_order() {
        let cfg = KvConfig::parse("m.z.x=1\nm.a.x=2\nm.z.y=3\nother=1\n").unwrap();
        assert_eq!(cfg.sections("m"), ["z", "a"]);
    }

    #[test]
    fn lists() {
        let cfg = KvConfig::parse("l=1, 2,3\n").unwrap();
        assert_eq!(cfg.list::<u32>("l").unwrap().unwrap(), [1, 2, 3]);
        assert!(cfg.list::<u32>("nope").unwrap().is_none());
    }

    #[test]
    fn builtin_parses() {
        let cfg = KvConfig::builtin();
        assert!(cfg.get("sensor.a_sat").is_some());
    }
}

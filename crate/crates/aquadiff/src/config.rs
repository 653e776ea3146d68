//! Flat key-value configuration files.
//!
//! The on-disk format is one `key = value` pair per line; `#` starts a
//! comment and blank lines are ignored. Keys are unique. List values are
//! comma-separated. [`FlatConfig::to_text`] emits a canonical rendering
//! (insertion order, single spaces) which is what checkpoint headers
//! digest, so a config round-trips byte-identically through
//! parse → to_text → parse.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};

/// An ordered set of unique `key = value` string pairs with typed getters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlatConfig {
    pairs: Vec<(String, String)>,
    index: HashMap<String, usize>,
}

impl FlatConfig {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "line {}: expected `key = value`, got {raw:?}",
                    lineno + 1
                )));
            };
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
            }
            if cfg.index.contains_key(key) {
                return Err(Error::Config(format!(
                    "line {}: duplicate key {key:?}",
                    lineno + 1
                )));
            }
            cfg.set(key, value);
        }
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Canonical text rendering: `key = value` lines in insertion order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.pairs {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    /// Inserts or replaces a key.
    pub fn set(&mut self, key: &str, value: impl ToString) {
        match self.index.get(key) {
            Some(&i) => self.pairs[i].1 = value.to_string(),
            None => {
                self.index.insert(key.to_string(), self.pairs.len());
                self.pairs.push((key.to_string(), value.to_string()));
            }
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.pairs.iter().map(|(k, _)| k.as_str())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.index.get(key).map(|&i| self.pairs[i].1.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Config(format!("missing required key {key:?}")))
    }

    fn parse_as<T: std::str::FromStr>(&self, key: &str, value: &str, kind: &str) -> Result<T> {
        value.parse().map_err(|_| {
            Error::Config(format!("key {key:?}: cannot parse {value:?} as {kind}"))
        })
    }

    pub fn require_f64(&self, key: &str) -> Result<f64> {
        let v = self.require(key)?;
        self.parse_as(key, v, "a real number")
    }

    pub fn require_usize(&self, key: &str) -> Result<usize> {
        let v = self.require(key)?;
        self.parse_as(key, v, "a non-negative integer")
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => self.parse_as(key, v, "a real number"),
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => self.parse_as(key, v, "a non-negative integer"),
        }
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => self.parse_as(key, v, "a non-negative integer"),
        }
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.get(key) {
            None => Ok(default),
            Some("true") | Some("1") => Ok(true),
            Some("false") | Some("0") => Ok(false),
            Some(v) => Err(Error::Config(format!(
                "key {key:?}: cannot parse {v:?} as a boolean"
            ))),
        }
    }

    pub fn string_or(&self, key: &str, default: &str) -> String {
        self.get(key).unwrap_or(default).to_string()
    }

    pub fn usize_list_or(&self, key: &str, default: &[usize]) -> Result<Vec<usize>> {
        match self.get(key) {
            None => Ok(default.to_vec()),
            Some("") => Ok(Vec::new()),
            Some(v) => v
                .split(',')
                .map(|part| self.parse_as(key, part.trim(), "an integer list entry"))
                .collect(),
        }
    }

    pub fn f64_list_or(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.get(key) {
            None => Ok(default.to_vec()),
            Some("") => Ok(Vec::new()),
            Some(v) => v
                .split(',')
                .map(|part| self.parse_as(key, part.trim(), "a real list entry"))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_pairs_comments_and_blanks() {
        let cfg = FlatConfig::parse(
            "# header comment\n\
             t_steps = 50\n\
             \n\
             learning_rate = 1e-3  # inline comment\n\
             name = run a\n",
        )
        .unwrap();
        assert_eq!(cfg.require_usize("t_steps").unwrap(), 50);
        assert_eq!(cfg.require_f64("learning_rate").unwrap(), 1e-3);
        assert_eq!(cfg.get("name"), Some("run a"));
        assert_eq!(cfg.get("missing"), None);
    }

    #[test]
    fn rejects_duplicates_and_malformed_lines() {
        assert!(FlatConfig::parse("a = 1\na = 2\n").is_err());
        assert!(FlatConfig::parse("just words\n").is_err());
        assert!(FlatConfig::parse("= 3\n").is_err());
    }

    #[test]
    fn typed_getters_report_parse_errors() {
        let cfg = FlatConfig::parse("x = notanumber\nflag = yes\n").unwrap();
        assert!(cfg.require_f64("x").is_err());
        assert!(cfg.bool_or("flag", false).is_err());
        assert!(cfg.require("absent").is_err());
        assert!(cfg.usize_or("x", 3).is_err());
    }

    #[test]
    fn defaults_apply_when_keys_absent() {
        let cfg = FlatConfig::parse("").unwrap();
        assert_eq!(cfg.f64_or("lr", 0.5).unwrap(), 0.5);
        assert_eq!(cfg.usize_or("n", 7).unwrap(), 7);
        assert!(cfg.bool_or("b", true).unwrap());
        assert_eq!(cfg.string_or("s", "d"), "d");
        assert_eq!(cfg.usize_list_or("l", &[1, 2]).unwrap(), vec![1, 2]);
    }

    #[test]
    fn lists_parse_with_spaces_and_empty_marker() {
        let cfg = FlatConfig::parse("m = 1, 2,4\ns = 0.5 , 0.25\ne =\n").unwrap();
        assert_eq!(cfg.usize_list_or("m", &[]).unwrap(), vec![1, 2, 4]);
        assert_eq!(cfg.f64_list_or("s", &[]).unwrap(), vec![0.5, 0.25]);
        assert_eq!(cfg.usize_list_or("e", &[9]).unwrap(), Vec::<usize>::new());
    }

    #[test]
    fn canonical_text_round_trips() {
        let mut cfg = FlatConfig::new();
        cfg.set("beta_start", 1e-6);
        cfg.set("t_steps", 50);
        cfg.set("mode", "cdc+eps");
        let text = cfg.to_text();
        let reparsed = FlatConfig::parse(&text).unwrap();
        assert_eq!(reparsed, cfg);
        assert_eq!(reparsed.to_text(), text);
        assert_eq!(
            text,
            "beta_start = 0.000001\nt_steps = 50\nmode = cdc+eps\n"
        );
    }

    #[test]
    fn set_replaces_existing_value_in_place() {
        let mut cfg = FlatConfig::parse("a = 1\nb = 2\n").unwrap();
        cfg.set("a", 9);
        assert_eq!(cfg.get("a"), Some("9"));
        assert_eq!(cfg.keys().collect::<Vec<_>>(), vec!["a", "b"]);
    }
}

//! Flat `section.key = value` configuration files.
//!
//! Precedence is flag, then file, then built-in default. Every value that a
//! run actually uses is recorded so the manifest carries the full resolved
//! configuration.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

#[derive(Debug, Clone, Default)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `section.key = value`", k + 1))?;
            let key = key.trim();
            let value = value.trim();
            let valid = key
                .split_once('.')
                .is_some_and(|(s, rest)| !s.is_empty() && !rest.is_empty() && !rest.contains('.'));
            if !valid || key.contains(char::is_whitespace) {
                bail!("line {}: bad key `{key}`; keys look like `section.key`", k + 1);
            }
            if entries.insert(key.to_string(), value.to_string()).is_some() {
                bail!("line {}: duplicate key `{key}`", k + 1);
            }
        }
        Ok(Config { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn from_map(entries: BTreeMap<String, String>) -> Self {
        Config { entries }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }
}

/// Resolves settings for one run and remembers what it resolved.
pub struct Resolver<'a> {
    file: &'a Config,
    resolved: BTreeMap<String, String>,
}

impl<'a> Resolver<'a> {
    pub fn new(file: &'a Config) -> Self {
        Resolver {
            file,
            resolved: BTreeMap::new(),
        }
    }

    fn file_value<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        self.file
            .get(key)
            .map(|s| s.parse::<T>().map_err(|e| anyhow!("config key `{key}` = `{s}`: {e}")))
            .transpose()
    }

    pub fn pick<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        let v = match flag {
            Some(v) => v,
            None => self.file_value(key)?.unwrap_or(default),
        };
        self.resolved.insert(key.to_string(), v.to_string());
        Ok(v)
    }

    /// Like [`pick`](Self::pick) without a default; unset keys stay out of
    /// the record.
    pub fn pick_opt<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        let v = match flag {
            Some(v) => Some(v),
            None => self.file_value(key)?,
        };
        if let Some(v) = &v {
            self.resolved.insert(key.to_string(), v.to_string());
        }
        Ok(v)
    }

    /// Fails on file keys in `sections` that nothing asked for.
    pub fn finish(self, sections: &[&str]) -> Result<BTreeMap<String, String>> {
        for key in self.file.entries.keys() {
            let section = key.split('.').next().unwrap_or("");
            if sections.contains(&section) && !self.resolved.contains_key(key) {
                bail!("unknown config key `{key}`");
            }
        }
        Ok(self.resolved)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_keys() {
        let c = Config::parse("# campaign\ngrid.n = 10001\n\n grid.eps=5e-4  # tent\n").unwrap();
        assert_eq!(c.get("grid.n"), Some("10001"));
        assert_eq!(c.get("grid.eps"), Some("5e-4"));
        assert_eq!(c.get("grid.delta"), None);
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(Config::parse("grid.n 5").is_err());
        assert!(Config::parse("n = 5").is_err());
        assert!(Config::parse("a.b.c = 5").is_err());
        assert!(Config::parse("grid.n = 5\ngrid.n = 6").is_err());
    }

    #[test]
    fn flags_override_file_override_defaults() {
        let c = Config::parse("sample.n = 50\nsample.trials = 3").unwrap();
        let mut r = Resolver::new(&c);
        assert_eq!(r.pick("sample.n", Some(7usize), 1).unwrap(), 7);
        assert_eq!(r.pick("sample.trials", None, 1u64).unwrap(), 3);
        assert_eq!(r.pick("sample.seed", None, 9u64).unwrap(), 9);
        assert_eq!(r.pick_opt::<String>("sample.out", None).unwrap(), None);
        let all = r.finish(&["sample"]).unwrap();
        assert_eq!(all.get("sample.n").map(String::as_str), Some("7"));
        assert_eq!(all.len(), 3);
    }

    #[test]
    fn unknown_keys_fail() {
        let c = Config::parse("sample.typo = 1\nother.x = 2").unwrap();
        let r = Resolver::new(&c);
        assert!(r.finish(&["sample"]).is_err());
        let r = Resolver::new(&c);
        assert!(r.finish(&["grid"]).is_ok());
    }

    #[test]
    fn bad_values_fail() {
        let c = Config::parse("grid.n = many").unwrap();
        let mut r = Resolver::new(&c);
        assert!(r.pick("grid.n", None, 3usize).is_err());
    }
}

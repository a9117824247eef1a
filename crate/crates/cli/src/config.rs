//! Flat `key = value` configuration files and flag/file/default precedence.
//!
//! One pair per line, `#` starts a comment, UTF-8. Flags override file
//! values; defaults fill the rest. Every effective value is echoed into the
//! result record so a run can be reproduced from its own output.

use anyhow::{anyhow, bail, Result};
use std::collections::BTreeMap;
use std::path::Path;

/// Parsed key = value file.
#[derive(Debug, Default, Clone)]
pub struct KvFile {
    entries: BTreeMap<String, String>,
}

impl KvFile {
    pub fn load(path: &Path) -> Result<KvFile> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow!("cannot read config {}: {e}", path.display()))?;
        KvFile::parse(&text)
    }

    pub fn parse(text: &str) -> Result<KvFile> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(idx) => &raw[..idx],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("line {}: expected `key = value`, got {raw:?}", lineno + 1);
            };
            entries.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(KvFile { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|s| s.as_str())
    }

    /// Reject keys this command does not understand.
    pub fn check_known_keys(&self, known: &[&str]) -> Result<()> {
        for key in self.entries.keys() {
            if !known.contains(&key.as_str()) {
                bail!("unknown key `{key}` in config file");
            }
        }
        Ok(())
    }
}

/// Resolves each parameter from flag, then file, then default, recording
/// the effective value for the config echo.
pub struct Params<'a> {
    file: &'a KvFile,
    effective: BTreeMap<String, String>,
}

impl<'a> Params<'a> {
    pub fn new(file: &'a KvFile) -> Self {
        Params {
            file,
            effective: BTreeMap::new(),
        }
    }

    fn record<T: std::fmt::Display>(&mut self, key: &str, value: &T) {
        self.effective.insert(key.to_string(), value.to_string());
    }

    pub fn f64(&mut self, key: &str, flag: Option<f64>, default: f64) -> Result<f64> {
        let v = match flag {
            Some(v) => v,
            None => match self.file.get(key) {
                Some(raw) => raw
                    .parse::<f64>()
                    .map_err(|_| anyhow!("key `{key}`: expected a real number, got {raw:?}"))?,
                None => default,
            },
        };
        self.record(key, &v);
        Ok(v)
    }

    pub fn usize(&mut self, key: &str, flag: Option<usize>, default: usize) -> Result<usize> {
        let v = match flag {
            Some(v) => v,
            None => match self.file.get(key) {
                Some(raw) => raw
                    .parse::<usize>()
                    .map_err(|_| anyhow!("key `{key}`: expected a nonnegative integer, got {raw:?}"))?,
                None => default,
            },
        };
        self.record(key, &v);
        Ok(v)
    }

    pub fn u64(&mut self, key: &str, flag: Option<u64>, default: u64) -> Result<u64> {
        let v = match flag {
            Some(v) => v,
            None => match self.file.get(key) {
                Some(raw) => raw
                    .parse::<u64>()
                    .map_err(|_| anyhow!("key `{key}`: expected a 64-bit seed, got {raw:?}"))?,
                None => default,
            },
        };
        self.record(key, &v);
        Ok(v)
    }

    pub fn bool(&mut self, key: &str, flag: Option<bool>, default: bool) -> Result<bool> {
        let v = match flag {
            Some(v) => v,
            None => match self.file.get(key) {
                Some(raw) => raw
                    .parse::<bool>()
                    .map_err(|_| anyhow!("key `{key}`: expected true or false, got {raw:?}"))?,
                None => default,
            },
        };
        self.record(key, &v);
        Ok(v)
    }

    pub fn string(&mut self, key: &str, flag: Option<String>, default: &str) -> Result<String> {
        let v = match flag {
            Some(v) => v,
            None => self
                .file
                .get(key)
                .map(|s| s.to_string())
                .unwrap_or_else(|| default.to_string()),
        };
        self.record(key, &v);
        Ok(v)
    }

    /// Comma-separated list of reals.
    pub fn f64_list(&mut self, key: &str, flag: Option<String>, default: &str) -> Result<Vec<f64>> {
        let raw = self.string(key, flag, default)?;
        raw.split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<f64>()
                    .map_err(|_| anyhow!("key `{key}`: expected comma-separated reals, got {tok:?}"))
            })
            .collect()
    }

    pub fn u64_list(&mut self, key: &str, flag: Option<String>, default: &str) -> Result<Vec<u64>> {
        let raw = self.string(key, flag, default)?;
        raw.split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<u64>()
                    .map_err(|_| anyhow!("key `{key}`: expected comma-separated integers, got {tok:?}"))
            })
            .collect()
    }

    pub fn into_effective(self) -> BTreeMap<String, String> {
        self.effective
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_whitespace() {
        let kv = KvFile::parse("# header\n tau = 0.5 # inline\n\nmu=0.7\n").unwrap();
        assert_eq!(kv.get("tau"), Some("0.5"));
        assert_eq!(kv.get("mu"), Some("0.7"));
        assert_eq!(kv.get("missing"), None);
    }

    #[test]
    fn rejects_lines_without_equals() {
        assert!(KvFile::parse("tau 0.5").is_err());
    }

    #[test]
    fn flags_override_file_values() {
        let kv = KvFile::parse("tau = 0.5").unwrap();
        let mut p = Params::new(&kv);
        assert_eq!(p.f64("tau", Some(0.3), 1.0).unwrap(), 0.3);
        let mut p = Params::new(&kv);
        assert_eq!(p.f64("tau", None, 1.0).unwrap(), 0.5);
        let mut p = Params::new(&kv);
        assert_eq!(p.f64("other", None, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn type_mismatch_names_key_and_type() {
        let kv = KvFile::parse("tau = fast").unwrap();
        let mut p = Params::new(&kv);
        let err = p.f64("tau", None, 1.0).unwrap_err().to_string();
        assert!(err.contains("tau") && err.contains("real"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected_by_name() {
        let kv = KvFile::parse("taa = 0.5").unwrap();
        let err = kv.check_known_keys(&["tau"]).unwrap_err().to_string();
        assert!(err.contains("taa"), "{err}");
    }

    #[test]
    fn effective_values_echo_back_parseably() {
        let kv = KvFile::parse("").unwrap();
        let mut p = Params::new(&kv);
        p.f64("tau", Some(0.30000000000000004), 1.0).unwrap();
        let echo = p.into_effective();
        // shortest round-trip float formatting: parsing the echo reproduces
        // the exact bits
        let reparsed: f64 = echo["tau"].parse().unwrap();
        assert_eq!(reparsed, 0.30000000000000004);
    }
}

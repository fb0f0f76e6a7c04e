//! Run configuration: every model and training setting plus evaluation
//! settings, read from a `key=value` file and command-line overrides.

use std::fmt::Write as _;
use std::path::Path;

use maint_core::training::{parse_kv, KvConfig};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub kv: KvConfig,
    pub ks: Vec<usize>,
    pub seeds: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            kv: KvConfig::default(),
            ks: maint_core::evaluation::DEFAULT_KS.to_vec(),
            seeds: 5,
        }
    }
}

pub fn parse_ks(value: &str) -> Result<Vec<usize>> {
    let ks: Vec<usize> = value
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| CliError::input(format!("K list must be positive integers: {value:?}")))?;
    if ks.is_empty() || ks.contains(&0) {
        return Err(CliError::input(format!("K list must be positive integers: {value:?}")));
    }
    Ok(ks)
}

impl RunConfig {
    pub const EVAL_KEYS: [&'static str; 2] = ["eval.ks", "eval.seeds"];

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "eval.ks" => self.ks = parse_ks(value)?,
            "eval.seeds" => {
                self.seeds = value
                    .parse()
                    .ok()
                    .filter(|&s| s >= 1)
                    .ok_or_else(|| CliError::input(format!("eval.seeds: cannot parse {value:?}")))?
            }
            _ if KvConfig::KEYS.contains(&key) => self.kv.set(key, value)?,
            _ => {
                let keys: Vec<&str> = KvConfig::KEYS.iter().chain(&Self::EVAL_KEYS).copied().collect();
                return Err(CliError::input(format!(
                    "unknown config key {key:?}; valid keys: {}",
                    keys.join(", ")
                )));
            }
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = RunConfig::default();
        for (k, v) in parse_kv(text)? {
            c.set(&k, &v)?;
        }
        Ok(c)
    }

    /// Defaults, then the file (when given), then `key=value` overrides.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut c = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                Self::from_text(&text).map_err(|e| e.context(p.display()))?
            }
            None => RunConfig::default(),
        };
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| CliError::input(format!("override {o:?} is not key=value")))?;
            c.set(k.trim(), v.trim())?;
        }
        Ok(c)
    }

    pub fn to_text(&self) -> String {
        let mut s = self.kv.to_text();
        let ks: Vec<String> = self.ks.iter().map(|k| k.to_string()).collect();
        let _ = writeln!(s, "eval.ks={}", ks.join(","));
        let _ = writeln!(s, "eval.seeds={}", self.seeds);
        s
    }

    pub fn validate(&self) -> Result<()> {
        self.kv.train.validate()?;
        Ok(())
    }
}

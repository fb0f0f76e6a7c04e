use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;
use core::str::FromStr;

use super::TrainConfig;
use crate::error::{Error, Result};
use crate::model::{LeakageMode, ModelConfig, Variant};

/// Split `key=value` lines. Blank lines and `#` comments are skipped.
pub fn parse_kv(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Config(format!("line {}: expected key=value, got {line:?}", n + 1)));
        };
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Model and training settings addressable by dotted keys.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct KvConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

impl KvConfig {
    pub const KEYS: [&'static str; 18] = [
        "model.d",
        "model.J",
        "model.gamma",
        "model.lambda",
        "model.dropout",
        "model.max_len",
        "model.variant",
        "model.n_items",
        "model.n_categories",
        "model.n_behaviors",
        "model.n_buckets",
        "model.target_behavior",
        "train.lr",
        "train.batch_size",
        "train.max_epochs",
        "train.patience",
        "train.seed",
        "train.leakage",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let m = &mut self.model;
        let t = &mut self.train;
        match key {
            "model.d" => m.dim = num(key, value)?,
            "model.J" => m.aspects = num(key, value)?,
            "model.gamma" => m.gamma = num(key, value)?,
            "model.lambda" => m.lambda = num(key, value)?,
            "model.dropout" => m.dropout = num(key, value)?,
            "model.max_len" => m.max_len = num(key, value)?,
            "model.variant" => m.variant = Variant::parse(value)?,
            "model.n_items" => m.n_items = num(key, value)?,
            "model.n_categories" => m.n_categories = num(key, value)?,
            "model.n_behaviors" => m.n_behaviors = num(key, value)?,
            "model.n_buckets" => m.n_buckets = num(key, value)?,
            "model.target_behavior" => m.target_behavior = num(key, value)?,
            "train.lr" => t.learning_rate = num(key, value)?,
            "train.batch_size" => t.batch_size = num(key, value)?,
            "train.max_epochs" => t.max_epochs = num(key, value)?,
            "train.patience" => t.patience = num(key, value)?,
            "train.seed" => t.seed = num(key, value)?,
            "train.leakage" => t.leakage = LeakageMode::parse(value)?,
            other => {
                return Err(Error::Config(format!(
                    "unknown key {other:?}; valid keys: {}",
                    Self::KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let m = &self.model;
        let t = &self.train;
        Some(match key {
            "model.d" => m.dim.to_string(),
            "model.J" => m.aspects.to_string(),
            "model.gamma" => m.gamma.to_string(),
            "model.lambda" => m.lambda.to_string(),
            "model.dropout" => m.dropout.to_string(),
            "model.max_len" => m.max_len.to_string(),
            "model.variant" => m.variant.name().to_string(),
            "model.n_items" => m.n_items.to_string(),
            "model.n_categories" => m.n_categories.to_string(),
            "model.n_behaviors" => m.n_behaviors.to_string(),
            "model.n_buckets" => m.n_buckets.to_string(),
            "model.target_behavior" => m.target_behavior.to_string(),
            "train.lr" => t.learning_rate.to_string(),
            "train.batch_size" => t.batch_size.to_string(),
            "train.max_epochs" => t.max_epochs.to_string(),
            "train.patience" => t.patience.to_string(),
            "train.seed" => t.seed.to_string(),
            "train.leakage" => t.leakage.name().to_string(),
            _ => return None,
        })
    }

    /// Apply every pair in order; the first bad key or value is an error.
    pub fn apply(&mut self, pairs: &[(String, String)]) -> Result<()> {
        for (k, v) in pairs {
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = KvConfig::default();
        c.apply(&parse_kv(text)?)?;
        Ok(c)
    }

    /// One `key=value` line per key, in [`KvConfig::KEYS`] order.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for k in Self::KEYS {
            let _ = writeln!(s, "{k}={}", self.get(k).unwrap_or_default());
        }
        s
    }
}

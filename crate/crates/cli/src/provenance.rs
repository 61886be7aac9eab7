use std::path::Path;

use anyhow::Result;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const RUN_FILE: &str = "run.json";

#[derive(Debug, Serialize)]
pub struct Versions {
    pub neuroalign: &'static str,
    pub neb_format: u32,
}

/// Provenance written beside every run's outputs. Contains no timestamps
/// or host details, so identical invocations produce identical files.
#[derive(Debug, Serialize)]
pub struct RunRecord {
    pub command: String,
    pub args: Vec<String>,
    pub seed: Option<u64>,
    pub config_hash: String,
    pub config: Value,
    pub versions: Versions,
}

impl RunRecord {
    pub fn new(command: &str, seed: Option<u64>, config: Value) -> Result<Self> {
        Ok(Self {
            command: command.into(),
            args: std::env::args().skip(1).collect(),
            seed,
            config_hash: config_hash(&config)?,
            config,
            versions: Versions {
                neuroalign: env!("CARGO_PKG_VERSION"),
                neb_format: neuroalign::data::FORMAT_VERSION,
            },
        })
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join(RUN_FILE), self)
    }
}

/// SHA-256 of the compact JSON encoding (object keys sorted).
pub fn config_hash(config: &Value) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable_and_content_sensitive() {
        let a = config_hash(&serde_json::json!({"epochs": 10, "seed": 1})).unwrap();
        assert_eq!(a, config_hash(&serde_json::json!({"epochs": 10, "seed": 1})).unwrap());
        assert_ne!(a, config_hash(&serde_json::json!({"epochs": 10, "seed": 2})).unwrap());
        assert_eq!(a.len(), 64);
    }
}

//! Run records written next to trained models.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use prae::metrics::EvalReport;
use prae::prae::{EpochLog, PraeConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    /// SHA-256 of the resolved config's JSON.
    pub config_hash: String,
    pub config: PraeConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<EvalReport>,
    pub log: Vec<EpochLog>,
    pub wall_clock_secs: f64,
}

pub fn config_hash(config: &PraeConfig) -> Result<String> {
    let json = serde_json::to_vec(config)?;
    Ok(Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect())
}

impl RunRecord {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        fs::write(path, s).with_context(|| format!("writing {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_tracks_config() {
        let a = PraeConfig::default();
        let b = PraeConfig {
            lambda: 2.0,
            ..a.clone()
        };
        let ha = config_hash(&a).unwrap();
        assert_eq!(ha.len(), 64);
        assert_eq!(ha, config_hash(&a.clone()).unwrap());
        assert_ne!(ha, config_hash(&b).unwrap());
    }
}

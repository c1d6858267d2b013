//! Top-level configuration, loadable from one JSON file. Every section and
//! field is optional and falls back to its default.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::alignment::AlignmentConfig;
use crate::error::Result;
use crate::language::LanguageConfig;
use crate::motion::FrameLengthPolicy;
use crate::policy::PolicySet;
use crate::scene::SceneConfig;
use crate::seed::sha256_hex;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusConfig {
    /// Alignment attempts budgeted per requested record before an action is
    /// declared unreachable.
    pub tasks_per_record: usize,
    /// Tasks are evaluated in fixed-size chunks so results never depend on the
    /// worker count.
    pub chunk_size: usize,
    /// Fraction of scenes assigned to the test split.
    pub test_fraction: f64,
    pub frame_length: FrameLengthPolicy,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            tasks_per_record: 4,
            chunk_size: 32,
            test_fraction: 0.2,
            frame_length: FrameLengthPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsConfig {
    /// Neighbors used for PCA normals on point-cloud bodies.
    pub normal_neighbors: usize,
    /// Marker count for APD.
    pub max_markers: usize,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            normal_neighbors: 8,
            max_markers: 64,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForgeConfig {
    pub scene: SceneConfig,
    pub alignment: AlignmentConfig,
    pub policy: PolicySet,
    pub language: LanguageConfig,
    pub corpus: CorpusConfig,
    pub metrics: MetricsConfig,
}

impl ForgeConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = crate::io::read_bytes(path)?;
        let cfg: ForgeConfig = serde_json::from_slice(&bytes)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.alignment.validate()?;
        if self.corpus.chunk_size == 0 || self.corpus.tasks_per_record == 0 {
            return Err(crate::Error::InvalidInput("corpus chunk_size and tasks_per_record must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.corpus.test_fraction) {
            return Err(crate::Error::InvalidInput("test_fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_json_fills_defaults() {
        let cfg: ForgeConfig = serde_json::from_str(r#"{"alignment":{"d_collide":0.03}}"#).unwrap();
        assert_eq!(cfg.alignment.d_collide, 0.03);
        assert_eq!(cfg.alignment.max_tries, 200);
        assert_eq!(cfg.scene, SceneConfig::default());
        assert_ne!(cfg.hash(), ForgeConfig::default().hash());
    }

    #[test]
    fn rejects_bad_thresholds() {
        let mut cfg = ForgeConfig::default();
        cfg.alignment.lie_containment_min = 0.0;
        assert!(cfg.validate().is_err());
    }
}

//! The single declarative configuration file read by every command.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::store::read_json;
use crate::error::Result;
use crate::features::{FeatureConfig, MfccConfig};
use crate::ingest::SegmentConfig;
use crate::pipeline::PipelineConfig;
use crate::scoring::ScoringConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProjectConfig {
    pub segment: SegmentConfig,
    pub features: FeatureConfig,
    /// MFCC export for external audio members; `null` turns it off.
    pub mfcc: Option<MfccConfig>,
    pub pipeline: PipelineConfig,
    pub scoring: ScoringConfig,
}

impl Default for ProjectConfig {
    fn default() -> Self {
        ProjectConfig {
            segment: SegmentConfig::default(),
            features: FeatureConfig::default(),
            mfcc: Some(MfccConfig::default()),
            pipeline: PipelineConfig::default(),
            scoring: ScoringConfig::default(),
        }
    }
}

impl ProjectConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let config: ProjectConfig = read_json(path)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.segment.vad.validate()?;
        self.pipeline.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_files_fill_in_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        std::fs::write(&path, br#"{"pipeline": {"loop": {"min_seed_labels": 50}}}"#).unwrap();
        let c = ProjectConfig::load(&path).unwrap();
        assert_eq!(c.pipeline.loop_config.min_seed_labels, 50);
        assert_eq!(c.features, FeatureConfig::default());
        assert!(c.mfcc.is_some());
        std::fs::write(&path, br#"{"mfcc": null}"#).unwrap();
        assert!(ProjectConfig::load(&path).unwrap().mfcc.is_none());
    }

    #[test]
    fn default_round_trips() {
        let c = ProjectConfig::default();
        let back: ProjectConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }
}

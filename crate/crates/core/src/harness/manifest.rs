use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifier::CNNConfig;
use crate::dataset::{DatasetSpec, FoldPlan, PairStrategy};
use crate::error::{Error, Result};
use crate::flow::FlowParams;
use crate::occlusion::{CropGeometry, OcclusionMask};
use crate::reconstructor::AEConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSettings {
    pub k: usize,
    pub seed: u64,
}

impl Default for FoldSettings {
    fn default() -> Self {
        Self { k: 10, seed: 0 }
    }
}

/// Everything a run depends on. Per-fold network seeds are `seed + fold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    #[serde(default = "code_version")]
    pub code_version: String,
    pub dataset: DatasetSpec,
    pub mask: OcclusionMask,
    #[serde(default)]
    pub crop: CropGeometry,
    #[serde(default)]
    pub flow: FlowParams,
    /// Side of the square flow fed to both networks.
    #[serde(default = "flow_size")]
    pub flow_size: usize,
    #[serde(default)]
    pub folds: FoldSettings,
    /// Explicit partition; computed from `folds` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fold_plan: Option<FoldPlan>,
    #[serde(default)]
    pub ae: AEConfig,
    #[serde(default)]
    pub cnn: CNNConfig,
    #[serde(default = "strategy")]
    pub strategy: PairStrategy,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

fn code_version() -> String {
    env!("CARGO_PKG_VERSION").to_string()
}

fn flow_size() -> usize {
    64
}

fn strategy() -> PairStrategy {
    PairStrategy::MidFlows
}

impl ExperimentManifest {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!("unsupported manifest schema {}", self.schema_version)));
        }
        self.flow.validate()?;
        self.ae.validate()?;
        self.cnn.validate()?;
        if self.ae.input_size != self.flow_size || self.cnn.input_size != self.flow_size {
            return Err(Error::Config(format!(
                "flow_size {} must equal ae.input_size {} and cnn.input_size {}",
                self.flow_size, self.ae.input_size, self.cnn.input_size
            )));
        }
        if self.folds.k < 3 {
            return Err(Error::Config("cross-validation needs k >= 3 (train, val and test folds)".into()));
        }
        Ok(())
    }

    /// Parses JSON, or TOML when the extension is `.toml`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {}", path.display(), e)))?;
        let m: Self = if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {}", path.display(), e)))?
        } else {
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {}", path.display(), e)))?
        };
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

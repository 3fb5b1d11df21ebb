//! Versioned JSON model files.
//!
//! Layout (`format_version` 1):
//!
//! ```text
//! {
//!   "format": "catgan-model",
//!   "format_version": 1,
//!   "feature_dim": d,
//!   "class_count": C,
//!   "config": { training configuration, see `TrainConfig` },
//!   "standardizer": { "mean": [d], "std": [d] },
//!   "model": { "variant": "plain" | "classwise" | "conditional", "nets": ... }
//! }
//! ```
//!
//! Each network is `{ "layers": [...], "kind": "Generator" | "Discriminator" }`
//! and each layer is `{ "weight": { "rows": d_in, "cols": d_out, "data": [row-major] },
//! "bias": [d_out], "activation": "Sigmoid" | "Linear" }`. Floats are written
//! in shortest round-trip form, so a reload is bit-exact.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Standardizer;
use crate::error::{config_err, shape_err, Result};
use crate::matrix::Matrix;
use crate::trainer::{Direction, TrainConfig, TrainedModel};

pub const MODEL_FORMAT: &str = "catgan-model";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedModel {
    pub format: String,
    pub format_version: u32,
    pub feature_dim: usize,
    pub class_count: usize,
    pub config: TrainConfig,
    pub standardizer: Standardizer,
    pub model: TrainedModel,
}

impl SavedModel {
    pub fn new(
        model: TrainedModel,
        standardizer: Standardizer,
        class_count: usize,
        config: TrainConfig,
    ) -> Self {
        SavedModel {
            format: MODEL_FORMAT.into(),
            format_version: MODEL_FORMAT_VERSION,
            feature_dim: model.feature_dim(),
            class_count,
            config,
            standardizer,
            model,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: SavedModel = serde_json::from_str(text)?;
        if m.format != MODEL_FORMAT {
            return config_err(format!("not a model file (format `{}`)", m.format));
        }
        if m.format_version != MODEL_FORMAT_VERSION {
            return config_err(format!(
                "unsupported model format version {}",
                m.format_version
            ));
        }
        if m.standardizer.dim() != m.feature_dim || m.model.feature_dim() != m.feature_dim {
            return config_err("model file dimensions are inconsistent");
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Generates in original feature units: standardize, run the chain,
    /// undo the standardization.
    pub fn generate_raw(
        &self,
        x: &Matrix,
        labels: Option<&[usize]>,
        direction: Direction,
    ) -> Result<Matrix> {
        if x.cols() != self.feature_dim {
            return shape_err(format!(
                "input has {} features, model expects {}",
                x.cols(),
                self.feature_dim
            ));
        }
        let z = self
            .model
            .generate(&self.standardizer.apply(x)?, labels, direction)?;
        self.standardizer.invert(&z)
    }
}

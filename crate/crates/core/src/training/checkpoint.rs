use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{OptimizerState, TrainConfig};
use crate::error::{Error, Result};
use crate::network::{ArchConfig, ModelParams, ParamRecord};

const FORMAT: &str = "empathy-checkpoint";
const VERSION: u32 = 1;

/// Best-so-far model, carried inside resumable checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestSnapshot {
    /// 0 means the initial parameters.
    pub epoch: usize,
    pub val_accuracy: f64,
    pub params: Vec<ParamRecord>,
}

/// Serialized model state. Checkpoints with an optimizer state can be resumed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    format: String,
    version: u32,
    pub config: TrainConfig,
    pub arch: ArchConfig,
    /// Number of completed epochs.
    pub epoch: usize,
    pub params: Vec<ParamRecord>,
    pub optimizer: Option<OptimizerState>,
    pub best: Option<BestSnapshot>,
}

impl Checkpoint {
    pub fn new(
        config: TrainConfig,
        model: &ModelParams,
        epoch: usize,
        optimizer: Option<OptimizerState>,
        best: Option<BestSnapshot>,
    ) -> Checkpoint {
        Checkpoint {
            format: FORMAT.into(),
            version: VERSION,
            config,
            arch: model.arch.clone(),
            epoch,
            params: model.to_records(),
            optimizer,
            best,
        }
    }

    pub fn model(&self) -> Result<ModelParams> {
        ModelParams::from_records(self.arch.clone(), &self.params)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Checkpoint> {
        let ckpt: Checkpoint = serde_json::from_str(s)?;
        if ckpt.format != FORMAT {
            return Err(Error::Validation(format!(
                "not a checkpoint (format `{}`)",
                ckpt.format
            )));
        }
        if ckpt.version != VERSION {
            return Err(Error::Validation(format!(
                "unsupported checkpoint version {}",
                ckpt.version
            )));
        }
        let model = ckpt.model()?;
        if let Some(opt) = &ckpt.optimizer {
            opt.check_layout(&model.store)?;
        }
        if let Some(best) = &ckpt.best {
            ModelParams::from_records(ckpt.arch.clone(), &best.params)?;
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Checkpoint> {
        Checkpoint::from_json(&std::fs::read_to_string(path)?)
    }
}

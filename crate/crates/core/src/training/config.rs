use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataio::{Dims, LabelTarget};
use crate::error::{Error, Result};
use crate::lda::LdaConfig;
use crate::network::{ArchConfig, ModalitySet, TopicInput};
use crate::objective::{KlDirection, LossWeights};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        })
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(Error::Config(format!("unknown optimizer `{other}`"))),
        }
    }
}

/// Dirichlet priors and sweep count for the target-producing topic model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LdaSettings {
    pub alpha: f64,
    pub beta: f64,
    pub sweeps: usize,
}

impl Default for LdaSettings {
    fn default() -> Self {
        let d = LdaConfig::default();
        LdaSettings {
            alpha: d.alpha,
            beta: d.beta,
            sweeps: d.sweeps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub dropout_rate: f64,
    pub topics_k: usize,
    pub weights: LossWeights,
    pub label_target: LabelTarget,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    pub sdat_enabled: bool,
    pub lda: LdaSettings,
    pub hidden: usize,
    pub modalities: ModalitySet,
    pub topic_input: TopicInput,
    pub kl_direction: KlDirection,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 32,
            epochs: 60,
            dropout_rate: 0.3,
            topics_k: 10,
            weights: LossWeights::default(),
            label_target: LabelTarget::Ee,
            optimizer: OptimizerKind::Adam,
            seed: 0,
            sdat_enabled: true,
            lda: LdaSettings::default(),
            hidden: 32,
            modalities: ModalitySet::ALL,
            topic_input: TopicInput::Projection,
            kl_direction: KlDirection::PredictionToTarget,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        let w = self.weights;
        if !(w.w_s >= 0.0 && w.w_t >= 0.0 && w.w_s.is_finite() && w.w_t.is_finite()) {
            return Err(Error::Config(format!(
                "loss weights must be non-negative, got w_s {} and w_t {}",
                w.w_s, w.w_t
            )));
        }
        if self.sdat_enabled {
            self.lda_config().validate()?;
        }
        Ok(())
    }

    pub fn arch(&self, dims: Dims) -> ArchConfig {
        ArchConfig {
            dims,
            hidden: self.hidden,
            topics_k: self.topics_k,
            modalities: self.modalities,
            topic_input: self.topic_input,
            dropout_rate: self.dropout_rate,
        }
    }

    pub fn lda_config(&self) -> LdaConfig {
        LdaConfig {
            k: self.topics_k,
            alpha: self.lda.alpha,
            beta: self.lda.beta,
            sweeps: self.lda.sweeps,
            seed: self.seed,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<TrainConfig> {
        let text = std::fs::read_to_string(path)?;
        let cfg: TrainConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

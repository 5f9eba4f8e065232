use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::evaluate;
use crate::dataio::{Dataset, LabelTarget};
use crate::error::{Error, Result};
use crate::network::ModalitySet;
use crate::objective::LossWeights;
use crate::training::{TargetMap, TrainConfig, Trainer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AblationSuite {
    /// Every non-empty subset of {text, audio, video}.
    Modality,
    /// With and without the topic-distribution loss.
    Sdat,
}

impl fmt::Display for AblationSuite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AblationSuite::Modality => "modality",
            AblationSuite::Sdat => "sdat",
        })
    }
}

impl FromStr for AblationSuite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "modality" => Ok(AblationSuite::Modality),
            "sdat" => Ok(AblationSuite::Sdat),
            other => Err(Error::Config(format!("unknown ablation suite `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: String,
    pub modalities: ModalitySet,
    pub w_t: f64,
    pub best_epoch: usize,
    pub accuracy: f64,
    pub weighted_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub suite: AblationSuite,
    pub label_target: LabelTarget,
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn row(&self, variant: &str) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.variant == variant)
    }

    /// Aligned plain-text rendering, one row per variant.
    pub fn to_text(&self) -> String {
        let label = self.label_target.as_str().to_uppercase();
        let width = self
            .rows
            .iter()
            .map(|r| r.variant.len())
            .chain(["Model".len()])
            .max()
            .unwrap_or(5);
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$}  {label} Acc.  {label} F1", "Model");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<width$}  {:>7.3}  {:>6.3}",
                r.variant, r.accuracy, r.weighted_f1
            );
        }
        out
    }
}

/// Trains each variant of `suite` on `train` (model selection on `val`) and
/// scores the selected model on `test`.
///
/// `targets` replaces the LDA-derived topic targets of the supervised rows.
pub fn run_ablation(
    suite: AblationSuite,
    cfg: &TrainConfig,
    train: &Dataset,
    val: &Dataset,
    test: &Dataset,
    targets: Option<&TargetMap>,
) -> Result<AblationTable> {
    let variants: Vec<(String, TrainConfig)> = match suite {
        AblationSuite::Modality => ModalitySet::ablation_variants()
            .into_iter()
            .map(|m| {
                (
                    m.name(),
                    TrainConfig {
                        modalities: m,
                        ..cfg.clone()
                    },
                )
            })
            .collect(),
        AblationSuite::Sdat => {
            let without = TrainConfig {
                sdat_enabled: false,
                weights: LossWeights {
                    w_t: 0.0,
                    ..cfg.weights
                },
                ..cfg.clone()
            };
            let with = TrainConfig {
                sdat_enabled: true,
                ..cfg.clone()
            };
            vec![("without SDAT".into(), without), ("with SDAT".into(), with)]
        }
    };
    let mut rows = Vec::with_capacity(variants.len());
    for (name, vcfg) in variants {
        let trainer = match targets {
            Some(t) if vcfg.sdat_enabled && vcfg.modalities.text => {
                Trainer::with_targets(train, val, vcfg.clone(), t.clone())?
            }
            _ => Trainer::new(train, val, vcfg.clone())?,
        };
        let run = trainer.run()?;
        let report = evaluate(&run.best.model()?, test, vcfg.label_target)?;
        log::info!("{name}: test accuracy {:.4}", report.accuracy);
        rows.push(AblationRow {
            variant: name,
            modalities: vcfg.modalities,
            w_t: if vcfg.sdat_enabled {
                vcfg.weights.w_t
            } else {
                0.0
            },
            best_epoch: run.best_epoch,
            accuracy: report.accuracy,
            weighted_f1: report.weighted_f1,
        });
    }
    Ok(AblationTable {
        suite,
        label_target: cfg.label_target,
        rows,
    })
}

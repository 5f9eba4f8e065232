//! Training objective: empathy cross-entropy, topic KL divergence and their
//! weighted sum.
//!
//! Cross-entropy is taken in the usual orientation, `−log ŷ[y]` averaged over
//! samples. The KL term defaults to `KL(ŷ_dis ‖ y_dis)` with the LDA target
//! held constant; [`KlDirection::TargetToPrediction`] flips it.

use serde::{Deserialize, Serialize};

use crate::dataio::NUM_CLASSES;
use crate::error::{Error, Result};
use crate::lda::TopicDistribution;
use crate::network::PassVars;
use crate::numcore::{floored, kl_sum, Matrix, Tape, Var};

/// Floor applied to probabilities inside logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub w_s: f64,
    pub w_t: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            w_s: 0.84,
            w_t: 0.16,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum KlDirection {
    /// Σ ŷ·ln(ŷ / y).
    #[default]
    PredictionToTarget,
    /// Σ y·ln(y / ŷ).
    TargetToPrediction,
}

/// `−ln(max(ŷ[y], 1e-12))`.
pub fn cross_entropy(y_hat: &[f64], y: usize) -> Result<f64> {
    if y >= NUM_CLASSES || y >= y_hat.len() {
        return Err(Error::OutOfRange {
            what: "class",
            index: y,
            len: y_hat.len().min(NUM_CLASSES),
        });
    }
    Ok(-floored(y_hat[y], PROB_FLOOR).ln())
}

/// `KL(pred ‖ target)` with the target floored at 1e-12 and 0·ln 0 = 0.
pub fn kl_loss(pred: &TopicDistribution, target: &TopicDistribution) -> Result<f64> {
    kl_divergence(pred, target, KlDirection::PredictionToTarget)
}

pub fn kl_divergence(
    pred: &TopicDistribution,
    target: &TopicDistribution,
    direction: KlDirection,
) -> Result<f64> {
    if pred.k() != target.k() {
        return Err(Error::dim("kl", (1, pred.k()), (1, target.k())));
    }
    Ok(match direction {
        KlDirection::PredictionToTarget => kl_sum(pred.probs(), target.probs(), PROB_FLOOR),
        KlDirection::TargetToPrediction => kl_sum(target.probs(), pred.probs(), PROB_FLOOR),
    })
}

pub fn total_loss(l_s: f64, l_t: f64, w: &LossWeights) -> f64 {
    w.w_s * l_s + w.w_t * l_t
}

/// Loss nodes attached to a forward pass.
#[derive(Debug, Clone, Copy)]
pub struct SampleLossVars {
    pub ce: Var,
    pub kl: Option<Var>,
    pub total: Var,
}

/// Adds `w_s·CE + w_t·KL` for one sample to `tape`. The KL term is recorded
/// only when both a topic head and a target exist.
pub fn attach_loss(
    tape: &mut Tape,
    vars: &PassVars,
    class: usize,
    target: Option<&TopicDistribution>,
    weights: &LossWeights,
    direction: KlDirection,
) -> Result<SampleLossVars> {
    let ce = tape.nll(vars.y_emp, class, PROB_FLOOR)?;
    let mut total = tape.scale(ce, weights.w_s)?;
    let mut kl = None;
    if let (Some(y_dis), Some(target)) = (vars.y_dis, target) {
        let reverse = direction == KlDirection::TargetToPrediction;
        let k = tape.kl(
            y_dis,
            Matrix::row_vector(target.probs()),
            reverse,
            PROB_FLOOR,
        )?;
        let weighted = tape.scale(k, weights.w_t)?;
        total = tape.add(total, weighted)?;
        kl = Some(k);
    }
    Ok(SampleLossVars { ce, kl, total })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleLoss {
    pub id: String,
    pub ce: f64,
    pub kl: Option<f64>,
}

/// Mean losses over a set of samples. `l_t` averages over the samples that
/// have a topic target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub l_s: f64,
    pub l_t: f64,
    pub total: f64,
    #[serde(skip)]
    pub per_sample: Vec<SampleLoss>,
}

impl LossReport {
    pub fn from_samples(per_sample: Vec<SampleLoss>, weights: &LossWeights) -> LossReport {
        let n = per_sample.len().max(1) as f64;
        let l_s = per_sample.iter().map(|s| s.ce).sum::<f64>() / n;
        let kls: Vec<f64> = per_sample.iter().filter_map(|s| s.kl).collect();
        let l_t = if kls.is_empty() {
            0.0
        } else {
            kls.iter().sum::<f64>() / kls.len() as f64
        };
        LossReport {
            l_s,
            l_t,
            total: total_loss(l_s, l_t, weights),
            per_sample,
        }
    }
}

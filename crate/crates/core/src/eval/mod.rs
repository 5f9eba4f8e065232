//! Accuracy, weighted F1, dataset evaluation and ablation tables.

mod ablation;
mod metrics;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::{Dataset, LabelTarget};
use crate::error::{Error, Result};
use crate::network::{Mode, ModelParams};

pub use ablation::{run_ablation, AblationRow, AblationSuite, AblationTable};
pub use metrics::{accuracy, macro_f1, weighted_f1, ConfusionMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub label_target: LabelTarget,
    pub accuracy: f64,
    pub weighted_f1: f64,
    pub macro_f1: f64,
    pub confusion: ConfusionMatrix,
    pub n: usize,
}

/// Evaluation-mode argmax class for every sample, ties to the lowest index.
pub fn predict(model: &ModelParams, ds: &Dataset) -> Result<Vec<usize>> {
    if model.arch.dims != ds.dims {
        return Err(Error::Validation(format!(
            "model expects dims {:?} but the dataset has {:?}",
            model.arch.dims, ds.dims
        )));
    }
    ds.samples
        .par_iter()
        .map(|s| Ok(model.forward(s, Mode::Eval)?.predicted_class()))
        .collect()
}

pub fn evaluate(
    model: &ModelParams,
    ds: &Dataset,
    label_target: LabelTarget,
) -> Result<EvalReport> {
    let pred = predict(model, ds)?;
    let confusion = ConfusionMatrix::from_predictions(&pred, &ds.labels(label_target))?;
    Ok(EvalReport {
        label_target,
        accuracy: confusion.accuracy(),
        weighted_f1: confusion.weighted_f1(),
        macro_f1: confusion.macro_f1(),
        confusion,
        n: pred.len(),
    })
}

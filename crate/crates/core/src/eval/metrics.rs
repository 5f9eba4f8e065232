use serde::{Deserialize, Serialize};

use crate::dataio::NUM_CLASSES;
use crate::error::{Error, Result};

/// Counts indexed `[true class][predicted class]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

impl ConfusionMatrix {
    pub fn from_predictions(pred: &[usize], truth: &[usize]) -> Result<ConfusionMatrix> {
        check_lengths(pred, truth)?;
        let mut counts = [[0u64; NUM_CLASSES]; NUM_CLASSES];
        for (&p, &t) in pred.iter().zip(truth) {
            for c in [p, t] {
                if c >= NUM_CLASSES {
                    return Err(Error::OutOfRange {
                        what: "class",
                        index: c,
                        len: NUM_CLASSES,
                    });
                }
            }
            counts[t][p] += 1;
        }
        Ok(ConfusionMatrix { counts })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..NUM_CLASSES).map(|c| self.counts[c][c]).sum()
    }

    /// True-class count.
    pub fn support(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn predicted(&self, class: usize) -> u64 {
        (0..NUM_CLASSES).map(|t| self.counts[t][class]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        self.trace() as f64 / self.total() as f64
    }

    /// Per-class F1, zero when precision and recall are both zero or undefined.
    pub fn f1(&self, class: usize) -> f64 {
        let tp = self.counts[class][class] as f64;
        let predicted = self.predicted(class);
        let support = self.support(class);
        let precision = if predicted == 0 {
            0.0
        } else {
            tp / predicted as f64
        };
        let recall = if support == 0 {
            0.0
        } else {
            tp / support as f64
        };
        if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        }
    }

    /// F1 averaged with weights proportional to true-class support.
    pub fn weighted_f1(&self) -> f64 {
        let n = self.total() as f64;
        (0..NUM_CLASSES)
            .map(|c| self.f1(c) * self.support(c) as f64 / n)
            .sum()
    }

    /// Unweighted mean of F1 over classes with nonzero support.
    pub fn macro_f1(&self) -> f64 {
        let present: Vec<usize> = (0..NUM_CLASSES).filter(|&c| self.support(c) > 0).collect();
        present.iter().map(|&c| self.f1(c)).sum::<f64>() / present.len() as f64
    }
}

fn check_lengths(pred: &[usize], truth: &[usize]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::Validation(format!(
            "{} predictions for {} labels",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Validation("no predictions to score".into()));
    }
    Ok(())
}

pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    Ok(ConfusionMatrix::from_predictions(pred, truth)?.accuracy())
}

pub fn weighted_f1(pred: &[usize], truth: &[usize]) -> Result<f64> {
    Ok(ConfusionMatrix::from_predictions(pred, truth)?.weighted_f1())
}

pub fn macro_f1(pred: &[usize], truth: &[usize]) -> Result<f64> {
    Ok(ConfusionMatrix::from_predictions(pred, truth)?.macro_f1())
}

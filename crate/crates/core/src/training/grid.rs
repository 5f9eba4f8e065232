use serde::{Deserialize, Serialize};

use super::{train, TrainConfig};
use crate::dataio::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub topics_k: usize,
    pub best_epoch: usize,
    pub val_accuracy: f64,
    pub val_weighted_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearch {
    pub best_k: usize,
    pub points: Vec<GridPoint>,
}

/// Picks the highest validation accuracy among `points`, preferring the
/// smaller topic count on ties.
pub fn select_topics(points: &[GridPoint]) -> Option<usize> {
    let mut best: Option<&GridPoint> = None;
    for p in points {
        best = match best {
            Some(b)
                if b.val_accuracy > p.val_accuracy
                    || (b.val_accuracy == p.val_accuracy && b.topics_k <= p.topics_k) =>
            {
                Some(b)
            }
            _ => Some(p),
        };
    }
    best.map(|p| p.topics_k)
}

/// Trains one model per candidate topic count (LDA targets refit each time)
/// and keeps the count with the best validation accuracy.
pub fn grid_search_topics(
    train_ds: &Dataset,
    val: &Dataset,
    cfg: &TrainConfig,
    candidates: &[usize],
) -> Result<GridSearch> {
    if candidates.is_empty() {
        return Err(Error::Config(
            "grid search needs at least one topic count".into(),
        ));
    }
    let mut points = Vec::with_capacity(candidates.len());
    for &k in candidates {
        let run = train(
            train_ds,
            val,
            &TrainConfig {
                topics_k: k,
                ..cfg.clone()
            },
        )?;
        log::info!(
            "K={k}: best val accuracy {:.4} at epoch {}",
            run.best_val_accuracy,
            run.best_epoch
        );
        points.push(GridPoint {
            topics_k: k,
            best_epoch: run.best_epoch,
            val_accuracy: run.best_val_accuracy,
            val_weighted_f1: run.best_val_weighted_f1,
        });
    }
    let best_k = select_topics(&points).expect("non-empty");
    Ok(GridSearch { best_k, points })
}

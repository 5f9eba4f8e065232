//! The training loop: LDA topic targets, seeded initialization, minibatch
//! optimization of `w_s·CE + w_t·KL`, per-epoch validation and checkpoints.
//!
//! Each minibatch is processed sample by sample (no padding); per-sample
//! gradients are computed in parallel and summed in sample order, so runs are
//! bit-reproducible regardless of thread count.

mod checkpoint;
mod config;
mod gradcheck;
mod grid;
mod optimizer;
mod trainer;

pub use checkpoint::{BestSnapshot, Checkpoint};
pub use config::{LdaSettings, OptimizerKind, TrainConfig};
pub use gradcheck::{gradcheck_model, GradCheckConfig};
pub use grid::{grid_search_topics, select_topics, GridPoint, GridSearch};
pub use optimizer::{optimizer_step, OptimizerState};
pub(crate) use trainer::stream_seed;
pub use trainer::{
    dataset_losses, fit_targets, prepare_targets, sample_loss, train, EpochRecord, TargetMap,
    TrainRun, Trainer,
};

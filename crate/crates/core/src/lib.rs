//! Multi-modal empathy prediction with topic-distribution supervision.
//!
//! Text, audio and video features are fused by text-anchored cross-modal
//! attention and an LSTM; an auxiliary head is trained to match LDA topic
//! distributions of supervisory documents that exist only at training time.

pub mod dataio;
pub mod error;
pub mod eval;
pub mod lda;
pub mod network;
pub mod numcore;
pub mod objective;
pub mod training;

pub use dataio::{ConversationSample, Dataset, Dims, LabelTarget, Labels};
pub use error::{Error, ErrorKind, Result};
pub use eval::{evaluate, EvalReport};
pub use lda::{LdaModel, TopicDistribution};
pub use network::{ArchConfig, ModalitySet, ModelParams};
pub use numcore::Matrix;
pub use objective::{LossReport, LossWeights};
pub use training::{train, Checkpoint, TrainConfig, TrainRun};

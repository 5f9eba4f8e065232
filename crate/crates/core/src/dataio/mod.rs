//! Conversation samples: the JSON-lines format, splitting and synthetic corpora.

mod dataset;
mod split;
pub mod synth;

pub use dataset::{
    ConversationSample, Dataset, Dims, LabelTarget, Labels, NUM_CLASSES, SCHEMA_VERSION,
};
pub use split::{split, SplitSpec};
pub use synth::{planted_token, planted_topic_of, synth_generate, SynthConfig, SynthTask};

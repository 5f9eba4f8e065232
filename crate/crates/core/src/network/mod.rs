//! The multi-modal empathy network.
//!
//! Text features are projected into each paired modality's width with
//! `tanh(K_T·W + b)`. For every pairing two attention maps are formed from the
//! affinity matrix: each modality step attends over text tokens (`A_m`), and
//! each text token attends over modality steps (`A_T`); both are row-normalized
//! over their key axis. The bimodal feature is `A_T·[K_m, A_m·K_T']`. Bimodal
//! features and raw text are concatenated per text step and run through an
//! LSTM whose final hidden state feeds a softmax empathy head. A separate
//! softmax head predicts a topic distribution from mean-pooled projected text.

mod arch;
mod forward;
mod params;

pub use arch::{ArchConfig, Modality, ModalitySet, TopicInput};
pub use forward::{
    combine_on_tape, cross_modal_combine, dropout_mask, lstm_on_tape, project_on_tape,
    BimodalFeature, BimodalVars, ForwardPass, Mode, PassVars,
};
pub use params::{
    Affine, FusionParams, Gate, Heads, LstmParams, ModelParams, ParamRecord, Projection,
};

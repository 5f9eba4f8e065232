use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::stream_seed;
use crate::dataio::{ConversationSample, Dims, Labels};
use crate::error::Result;
use crate::lda::TopicDistribution;
use crate::network::{ArchConfig, ModalitySet, Mode, ModelParams, TopicInput};
use crate::numcore::{finite_diff_check, GradCheckReport, Matrix};
use crate::objective::{attach_loss, KlDirection, LossWeights};

/// Shapes and step size for a finite-difference check of the full loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradCheckConfig {
    pub dims: Dims,
    pub n_t: usize,
    pub n_a: usize,
    pub n_v: usize,
    pub hidden: usize,
    pub topics_k: usize,
    pub eps: f64,
    pub weights: LossWeights,
    pub kl_direction: KlDirection,
    pub modalities: ModalitySet,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            dims: Dims {
                d_t: 4,
                d_a: 3,
                d_v: 3,
            },
            n_t: 3,
            n_a: 2,
            n_v: 2,
            hidden: 5,
            topics_k: 3,
            eps: 1e-5,
            weights: LossWeights::default(),
            kl_direction: KlDirection::PredictionToTarget,
            modalities: ModalitySet::ALL,
        }
    }
}

fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Result<Matrix> {
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    Matrix::from_vec(rows, cols, data)
}

/// Seeded initialization and a seeded random sample and topic target; checks
/// `w_s·CE + w_t·KL` in evaluation mode (no dropout).
pub fn gradcheck_model(cfg: &GradCheckConfig, seed: u64) -> Result<GradCheckReport> {
    let arch = ArchConfig {
        dims: cfg.dims,
        hidden: cfg.hidden,
        topics_k: cfg.topics_k,
        modalities: cfg.modalities,
        topic_input: TopicInput::Projection,
        dropout_rate: 0.0,
    };
    let model = ModelParams::init(&arch, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, 1, 0));
    let sample = ConversationSample::new(
        "gradcheck",
        uniform_matrix(&mut rng, cfg.n_t, cfg.dims.d_t)?,
        uniform_matrix(&mut rng, cfg.n_a, cfg.dims.d_a)?,
        uniform_matrix(&mut rng, cfg.n_v, cfg.dims.d_v)?,
        Labels::uniform(rng.random_range(0..3)),
        None,
    );
    let raw: Vec<f64> = (0..cfg.topics_k)
        .map(|_| rng.random_range(0.05..1.0))
        .collect();
    let total: f64 = raw.iter().sum();
    let target = TopicDistribution::new(raw.iter().map(|v| v / total).collect())?;
    let class = sample.labels.ee as usize;
    finite_diff_check(&model.store, cfg.eps, |store, tape| {
        let vars = model.record(store, tape, &sample, Mode::Eval)?;
        let loss = attach_loss(
            tape,
            &vars,
            class,
            Some(&target),
            &cfg.weights,
            cfg.kl_direction,
        )?;
        Ok(loss.total)
    })
}

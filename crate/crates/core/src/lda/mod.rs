//! Collapsed Gibbs sampling for latent Dirichlet allocation.
//!
//! The sampler integrates out the document-topic and topic-word multinomials
//! and resamples each token's topic from
//!
//! ```text
//! p(z = k | rest) ∝ (n_dk + α) · (n_kw + β) / (n_k + Vβ)
//! ```
//!
//! with all counts excluding the token being resampled. Per-document topic
//! distributions are point estimates from the final sweep's counts.

mod model;
mod vocab;

pub use model::{fold_in, fold_in_ids, LdaConfig, LdaModel};
pub use vocab::{Corpus, Vocabulary};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point on the K-simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TopicDistribution {
    probs: Vec<f64>,
}

impl TopicDistribution {
    /// Checks that `probs` lies on the simplex within 1e-9.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Validation("topic distribution is empty".into()));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Validation(format!(
                "topic distribution {probs:?} is not on the simplex (sum {sum})"
            )));
        }
        Ok(TopicDistribution { probs })
    }

    pub fn uniform(k: usize) -> Self {
        TopicDistribution {
            probs: vec![1.0 / k as f64; k],
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn k(&self) -> usize {
        self.probs.len()
    }

    /// Most probable topic; ties go to the lowest index.
    pub fn dominant(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    pub fn entropy(&self) -> f64 {
        self.probs
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| -p * p.ln())
            .sum()
    }

    pub fn total_variation(&self, other: &TopicDistribution) -> f64 {
        0.5 * self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }
}

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::{Corpus, TopicDistribution, Vocabulary};
use crate::error::{Error, Result};

const FORMAT: &str = "lda-model";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LdaConfig {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub sweeps: usize,
    pub seed: u64,
}

impl Default for LdaConfig {
    fn default() -> Self {
        LdaConfig {
            k: 10,
            alpha: 0.1,
            beta: 0.01,
            sweeps: 500,
            seed: 0,
        }
    }
}

impl LdaConfig {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("LDA needs at least one topic".into()));
        }
        if self.sweeps == 0 {
            return Err(Error::Config("LDA needs at least one sweep".into()));
        }
        if !(self.alpha > 0.0 && self.beta > 0.0) {
            return Err(Error::Config(format!(
                "LDA priors must be positive (alpha {}, beta {})",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    format: String,
    version: u32,
    k: usize,
    alpha: f64,
    beta: f64,
    sweeps: usize,
    seed: u64,
    vocab: Vocabulary,
    docs: Vec<Vec<usize>>,
    assignments: Vec<Vec<usize>>,
    /// K×V, row-major.
    topic_word_counts: Vec<u32>,
    topic_totals: Vec<u32>,
    /// D×K, row-major.
    doc_topic_counts: Vec<u32>,
}

/// Working state of one sampler chain.
struct Sampler<'a> {
    k: usize,
    v: usize,
    alpha: f64,
    beta: f64,
    nkw: &'a mut [u32],
    nk: &'a mut [u32],
    weights: Vec<f64>,
}

impl Sampler<'_> {
    /// Draws a topic for word `w` given the document's topic counts, all
    /// counts already excluding the token being resampled.
    fn draw(&mut self, rng: &mut ChaCha8Rng, ndk: &[u32], w: usize) -> usize {
        let vbeta = self.v as f64 * self.beta;
        let mut total = 0.0;
        for k in 0..self.k {
            let p = (ndk[k] as f64 + self.alpha) * (self.nkw[k * self.v + w] as f64 + self.beta)
                / (self.nk[k] as f64 + vbeta);
            total += p;
            self.weights[k] = total;
        }
        let u = rng.random::<f64>() * total;
        self.weights
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.k - 1)
    }
}

impl LdaModel {
    pub fn fit(corpus: &Corpus, cfg: &LdaConfig) -> Result<LdaModel> {
        Self::fit_with_observer(corpus, cfg, |_, _| {})
    }

    /// Like [`LdaModel::fit`], calling `observer(sweep, model)` after every sweep.
    pub fn fit_with_observer(
        corpus: &Corpus,
        cfg: &LdaConfig,
        mut observer: impl FnMut(usize, &LdaModel),
    ) -> Result<LdaModel> {
        cfg.validate()?;
        if corpus.docs.is_empty() {
            return Err(Error::Validation("LDA corpus has no documents".into()));
        }
        if let Some(d) = corpus.docs.iter().position(Vec::is_empty) {
            return Err(Error::EmptyDocument(d));
        }
        let v = corpus.vocab.len();
        if let Some(&bad) = corpus.docs.iter().flatten().find(|&&w| w >= v) {
            return Err(Error::OutOfRange {
                what: "token id",
                index: bad,
                len: v,
            });
        }
        let total_tokens = corpus.num_tokens();
        if cfg.k > total_tokens {
            log::warn!(
                "LDA topic count {} exceeds the corpus token count {total_tokens}",
                cfg.k
            );
        }

        let k = cfg.k;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let assignments: Vec<Vec<usize>> = corpus
            .docs
            .iter()
            .map(|d| d.iter().map(|_| rng.random_range(0..k)).collect())
            .collect();
        let mut model = LdaModel {
            format: FORMAT.into(),
            version: VERSION,
            k,
            alpha: cfg.alpha,
            beta: cfg.beta,
            sweeps: cfg.sweeps,
            seed: cfg.seed,
            vocab: corpus.vocab.clone(),
            docs: corpus.docs.clone(),
            assignments,
            topic_word_counts: Vec::new(),
            topic_totals: Vec::new(),
            doc_topic_counts: Vec::new(),
        };
        model.recount();

        let mut ndk_row = vec![0u32; k];
        for sweep in 0..cfg.sweeps {
            let mut sampler = Sampler {
                k,
                v,
                alpha: model.alpha,
                beta: model.beta,
                nkw: &mut model.topic_word_counts,
                nk: &mut model.topic_totals,
                weights: vec![0.0; k],
            };
            for (d, doc) in model.docs.iter().enumerate() {
                let ndk = &mut model.doc_topic_counts[d * k..(d + 1) * k];
                ndk_row.copy_from_slice(ndk);
                for (i, &w) in doc.iter().enumerate() {
                    let old = model.assignments[d][i];
                    ndk_row[old] -= 1;
                    sampler.nkw[old * v + w] -= 1;
                    sampler.nk[old] -= 1;

                    let new = sampler.draw(&mut rng, &ndk_row, w);

                    ndk_row[new] += 1;
                    sampler.nkw[new * v + w] += 1;
                    sampler.nk[new] += 1;
                    model.assignments[d][i] = new;
                }
                ndk.copy_from_slice(&ndk_row);
            }
            observer(sweep, &model);
        }
        Ok(model)
    }

    /// Rebuilds all count matrices from the assignments.
    fn recount(&mut self) {
        let (k, v) = (self.k, self.vocab.len());
        self.topic_word_counts = vec![0; k * v];
        self.topic_totals = vec![0; k];
        self.doc_topic_counts = vec![0; self.docs.len() * k];
        for (d, (doc, z)) in self.docs.iter().zip(&self.assignments).enumerate() {
            for (&w, &t) in doc.iter().zip(z) {
                self.topic_word_counts[t * v + w] += 1;
                self.topic_totals[t] += 1;
                self.doc_topic_counts[d * k + t] += 1;
            }
        }
    }

    /// True when every count matrix equals a fresh recount from the assignments.
    pub fn counts_consistent(&self) -> bool {
        if self.assignments.len() != self.docs.len()
            || self
                .assignments
                .iter()
                .zip(&self.docs)
                .any(|(z, d)| z.len() != d.len() || z.iter().any(|&t| t >= self.k))
        {
            return false;
        }
        let mut fresh = self.clone();
        fresh.recount();
        fresh.topic_word_counts == self.topic_word_counts
            && fresh.topic_totals == self.topic_totals
            && fresh.doc_topic_counts == self.doc_topic_counts
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn num_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn assignments(&self) -> &[Vec<usize>] {
        &self.assignments
    }

    pub fn topic_word_count(&self, k: usize, w: usize) -> u32 {
        self.topic_word_counts[k * self.vocab.len() + w]
    }

    pub fn topic_totals(&self) -> &[u32] {
        &self.topic_totals
    }

    pub fn doc_topic_counts(&self, d: usize) -> &[u32] {
        &self.doc_topic_counts[d * self.k..(d + 1) * self.k]
    }

    /// `p_j = (n_dj + α) / (N_d + Kα)`.
    pub fn doc_topic_distribution(&self, d: usize) -> Result<TopicDistribution> {
        if d >= self.docs.len() {
            return Err(Error::OutOfRange {
                what: "document",
                index: d,
                len: self.docs.len(),
            });
        }
        Ok(smoothed(
            self.doc_topic_counts(d),
            self.docs[d].len(),
            self.alpha,
        ))
    }

    /// `(n_kw + β) / (n_k + Vβ)` for every word of topic `k`.
    pub fn topic_word_distribution(&self, k: usize) -> Result<Vec<f64>> {
        if k >= self.k {
            return Err(Error::OutOfRange {
                what: "topic",
                index: k,
                len: self.k,
            });
        }
        let v = self.vocab.len();
        let denom = self.topic_totals[k] as f64 + v as f64 * self.beta;
        Ok((0..v)
            .map(|w| (self.topic_word_counts[k * v + w] as f64 + self.beta) / denom)
            .collect())
    }

    /// The `n` most probable words of topic `k`; ties by ascending token id.
    pub fn top_words(&self, k: usize, n: usize) -> Result<Vec<(String, f64)>> {
        let probs = self.topic_word_distribution(k)?;
        let mut order: Vec<usize> = (0..probs.len()).collect();
        order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
        Ok(order
            .into_iter()
            .take(n)
            .map(|w| (self.vocab.tokens()[w].clone(), probs[w]))
            .collect())
    }

    /// Log joint probability `log p(w, z)` of the collapsed model.
    pub fn log_joint(&self) -> f64 {
        let (k, v) = (self.k, self.vocab.len());
        let (alpha, beta) = (self.alpha, self.beta);
        let vbeta = v as f64 * beta;
        let mut lp = 0.0;
        for t in 0..k {
            lp += ln_gamma(vbeta) - v as f64 * ln_gamma(beta);
            for w in 0..v {
                lp += ln_gamma(self.topic_word_counts[t * v + w] as f64 + beta);
            }
            lp -= ln_gamma(self.topic_totals[t] as f64 + vbeta);
        }
        let kalpha = k as f64 * alpha;
        for (d, doc) in self.docs.iter().enumerate() {
            lp += ln_gamma(kalpha) - k as f64 * ln_gamma(alpha);
            for &c in self.doc_topic_counts(d) {
                lp += ln_gamma(c as f64 + alpha);
            }
            lp -= ln_gamma(doc.len() as f64 + kalpha);
        }
        lp
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer(&mut w, self)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<LdaModel> {
        let model: LdaModel = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        model.check_loaded()?;
        Ok(model)
    }

    pub fn from_json(s: &str) -> Result<LdaModel> {
        let model: LdaModel = serde_json::from_str(s)?;
        model.check_loaded()?;
        Ok(model)
    }

    fn check_loaded(&self) -> Result<()> {
        if self.format != FORMAT || self.version != VERSION {
            return Err(Error::Validation(format!(
                "unsupported model container {} v{}",
                self.format, self.version
            )));
        }
        let v = self.vocab.len();
        if self.topic_word_counts.len() != self.k * v
            || self.topic_totals.len() != self.k
            || self.doc_topic_counts.len() != self.docs.len() * self.k
            || self.docs.iter().flatten().any(|&w| w >= v)
            || !self.counts_consistent()
        {
            return Err(Error::Validation(
                "LDA model counts are inconsistent with its assignments".into(),
            ));
        }
        Ok(())
    }
}

fn smoothed(counts: &[u32], n: usize, alpha: f64) -> TopicDistribution {
    let k = counts.len();
    let denom = n as f64 + k as f64 * alpha;
    let probs = counts.iter().map(|&c| (c as f64 + alpha) / denom).collect();
    TopicDistribution { probs }
}

/// Infers the topic distribution of an unseen document under the frozen
/// topic-word counts of `model`. Tokens outside the vocabulary are dropped.
pub fn fold_in(
    model: &LdaModel,
    tokens: &[impl AsRef<str>],
    sweeps: usize,
    seed: u64,
) -> Result<TopicDistribution> {
    let ids: Vec<usize> = tokens
        .iter()
        .filter_map(|t| model.vocab.id(t.as_ref()))
        .collect();
    fold_in_ids(model, &ids, sweeps, seed)
}

pub fn fold_in_ids(
    model: &LdaModel,
    doc: &[usize],
    sweeps: usize,
    seed: u64,
) -> Result<TopicDistribution> {
    if doc.is_empty() {
        return Err(Error::EmptyAfterFilter);
    }
    if sweeps == 0 {
        return Err(Error::Config("fold-in needs at least one sweep".into()));
    }
    let (k, v) = (model.k, model.vocab.len());
    if let Some(&bad) = doc.iter().find(|&&w| w >= v) {
        return Err(Error::OutOfRange {
            what: "token id",
            index: bad,
            len: v,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z: Vec<usize> = doc.iter().map(|_| rng.random_range(0..k)).collect();
    let mut ndk = vec![0u32; k];
    for &t in &z {
        ndk[t] += 1;
    }
    // Frozen topic-word counts: the sampler only reads them.
    let mut nkw = model.topic_word_counts.clone();
    let mut nk = model.topic_totals.clone();
    let mut sampler = Sampler {
        k,
        v,
        alpha: model.alpha,
        beta: model.beta,
        nkw: &mut nkw,
        nk: &mut nk,
        weights: vec![0.0; k],
    };
    for _ in 0..sweeps {
        for (i, &w) in doc.iter().enumerate() {
            ndk[z[i]] -= 1;
            let new = sampler.draw(&mut rng, &ndk, w);
            ndk[new] += 1;
            z[i] = new;
        }
    }
    Ok(smoothed(&ndk, doc.len(), model.alpha))
}

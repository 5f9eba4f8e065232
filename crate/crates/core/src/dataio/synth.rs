//! Seeded synthetic conversation corpora with known label mechanisms.
//!
//! * `unimodal-linear`: the label is the argmax over text channels 0..3 of
//!   the per-channel mean, so it is linearly decodable from text alone.
//! * `cross-modal-parity`: channel 0 of audio and channel 0 of video each
//!   carry a constant sign over all rows; the label is the XOR of the two
//!   signs. Text is pure noise.
//! * `topic-correlated`: supervisory documents are drawn from planted topic
//!   mixtures; the label is the majority planted topic of the document and
//!   the text carries a weaker cue on the matching channel.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{ConversationSample, Dataset, Dims, Labels, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::numcore::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthTask {
    UnimodalLinear,
    CrossModalParity,
    TopicCorrelated,
}

impl SynthTask {
    pub fn as_str(self) -> &'static str {
        match self {
            SynthTask::UnimodalLinear => "unimodal-linear",
            SynthTask::CrossModalParity => "cross-modal-parity",
            SynthTask::TopicCorrelated => "topic-correlated",
        }
    }
}

impl fmt::Display for SynthTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SynthTask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unimodal-linear" => Ok(SynthTask::UnimodalLinear),
            "cross-modal-parity" => Ok(SynthTask::CrossModalParity),
            "topic-correlated" => Ok(SynthTask::TopicCorrelated),
            other => Err(Error::Config(format!("unknown synthetic task `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub task: SynthTask,
    pub n: usize,
    pub dims: Dims,
    /// Inclusive row-count ranges per modality.
    pub text_len: (usize, usize),
    pub audio_len: (usize, usize),
    pub video_len: (usize, usize),
    /// Standard deviation of the background noise.
    pub noise: f64,
    /// Offset added to the label-bearing channel.
    pub signal: f64,
    pub planted_topics: usize,
    pub words_per_topic: usize,
    pub doc_len: usize,
    /// Probability that a document token comes from its dominant topic.
    pub topic_purity: f64,
    /// Prefix for generated sample ids.
    pub id_prefix: String,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            task: SynthTask::UnimodalLinear,
            n: 200,
            dims: Dims {
                d_t: 6,
                d_a: 4,
                d_v: 4,
            },
            text_len: (3, 5),
            audio_len: (3, 5),
            video_len: (3, 5),
            noise: 0.5,
            signal: 1.5,
            planted_topics: 2,
            words_per_topic: 20,
            doc_len: 50,
            topic_purity: 0.9,
            id_prefix: "syn".into(),
        }
    }
}

impl SynthConfig {
    pub fn for_task(task: SynthTask, n: usize) -> Self {
        SynthConfig {
            task,
            n,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let d = self.dims;
        if d.d_t == 0 || d.d_a == 0 || d.d_v == 0 {
            return Err(Error::Config("synthetic dims must be positive".into()));
        }
        for (name, (lo, hi)) in [
            ("text_len", self.text_len),
            ("audio_len", self.audio_len),
            ("video_len", self.video_len),
        ] {
            if lo == 0 || lo > hi {
                return Err(Error::Config(format!(
                    "{name} range ({lo}, {hi}) is invalid"
                )));
            }
        }
        if self.planted_topics == 0 || self.words_per_topic == 0 || self.doc_len == 0 {
            return Err(Error::Config("topic settings must be positive".into()));
        }
        match self.task {
            SynthTask::UnimodalLinear if d.d_t < NUM_CLASSES => Err(Error::Config(format!(
                "unimodal-linear needs d_t >= {NUM_CLASSES}"
            ))),
            SynthTask::TopicCorrelated if self.planted_topics > d.d_t.min(NUM_CLASSES) => {
                Err(Error::Config(format!(
                    "topic-correlated supports at most min(d_t, {NUM_CLASSES}) planted topics"
                )))
            }
            _ => Ok(()),
        }
    }
}

/// Token string for word `j` of planted topic `k`.
pub fn planted_token(topic: usize, word: usize) -> String {
    format!("t{topic}w{word}")
}

/// Planted topic encoded in a token produced by [`planted_token`].
pub fn planted_topic_of(token: &str) -> Option<usize> {
    let rest = token.strip_prefix('t')?;
    let (topic, _) = rest.split_once('w')?;
    topic.parse().ok()
}

struct Gen {
    rng: ChaCha8Rng,
    normal: Normal<f64>,
}

impl Gen {
    fn len(&mut self, (lo, hi): (usize, usize)) -> usize {
        self.rng.random_range(lo..=hi)
    }

    fn noise(&mut self, rows: usize, cols: usize) -> Matrix {
        let data = (0..rows * cols)
            .map(|_| self.normal.sample(&mut self.rng))
            .collect();
        Matrix::from_vec(rows, cols, data).expect("shape")
    }

    /// Document whose dominant topic is `topic`; returns tokens and the
    /// majority planted topic (ties to the lowest topic id).
    fn document(&mut self, cfg: &SynthConfig, topic: usize) -> (Vec<String>, usize) {
        let p = cfg.planted_topics;
        let mut counts = vec![0usize; p];
        let tokens = (0..cfg.doc_len)
            .map(|_| {
                let k = if p == 1 || self.rng.random::<f64>() < cfg.topic_purity {
                    topic
                } else {
                    let other = self.rng.random_range(0..p - 1);
                    if other >= topic {
                        other + 1
                    } else {
                        other
                    }
                };
                counts[k] += 1;
                planted_token(k, self.rng.random_range(0..cfg.words_per_topic))
            })
            .collect();
        let mut majority = 0;
        for k in 1..p {
            if counts[k] > counts[majority] {
                majority = k;
            }
        }
        (tokens, majority)
    }
}

fn column_mean(m: &Matrix, c: usize) -> f64 {
    (0..m.rows()).map(|r| m.get(r, c)).sum::<f64>() / m.rows() as f64
}

/// Generates a dataset; identical `(cfg, seed)` give identical output.
pub fn synth_generate(cfg: &SynthConfig, seed: u64) -> Result<Dataset> {
    cfg.validate()?;
    if !(cfg.noise >= 0.0 && cfg.noise.is_finite()) {
        return Err(Error::Config(
            "noise must be a finite non-negative value".into(),
        ));
    }
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        normal: Normal::new(0.0, cfg.noise).map_err(|e| Error::Config(e.to_string()))?,
    };
    let d = cfg.dims;
    let mut samples = Vec::with_capacity(cfg.n);
    for i in 0..cfg.n {
        let (n_t, n_a, n_v) = (
            g.len(cfg.text_len),
            g.len(cfg.audio_len),
            g.len(cfg.video_len),
        );
        let mut text = g.noise(n_t, d.d_t);
        let mut audio = g.noise(n_a, d.d_a);
        let mut video = g.noise(n_v, d.d_v);
        let doc_topic = g.rng.random_range(0..cfg.planted_topics);
        let (tokens, majority) = g.document(cfg, doc_topic);

        let label = match cfg.task {
            SynthTask::UnimodalLinear => {
                let intended = g.rng.random_range(0..NUM_CLASSES);
                for r in 0..n_t {
                    text.set(r, intended, text.get(r, intended) + cfg.signal);
                }
                let means: Vec<f64> = (0..NUM_CLASSES).map(|c| column_mean(&text, c)).collect();
                argmax(&means)
            }
            SynthTask::CrossModalParity => {
                let sign_a = g.rng.random::<bool>();
                let sign_v = g.rng.random::<bool>();
                for (m, positive) in [(&mut audio, sign_a), (&mut video, sign_v)] {
                    let s = if positive { 1.0 } else { -1.0 };
                    for r in 0..m.rows() {
                        let mag = g.rng.random_range(0.5..1.5);
                        m.set(r, 0, s * mag);
                    }
                }
                usize::from(sign_a != sign_v)
            }
            SynthTask::TopicCorrelated => {
                for r in 0..n_t {
                    text.set(r, majority, text.get(r, majority) + cfg.signal);
                }
                majority
            }
        };
        samples.push(ConversationSample::new(
            format!("{}-{i:05}", cfg.id_prefix),
            text,
            audio,
            video,
            Labels::uniform(label as u8),
            Some(tokens),
        ));
    }
    Dataset::new(d, samples)
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ArchConfig, Modality};
use crate::error::{Error, Result};
use crate::numcore::{Matrix, ParamId, ParamStore};

/// Weight and bias of one affine map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Affine {
    pub w: ParamId,
    pub b: ParamId,
}

/// Projection of the anchor (text) features into one paired modality's width.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Projection {
    pub target: Modality,
    pub affine: Affine,
}

/// One projection per fused pairing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FusionParams {
    pub projections: Vec<Projection>,
}

impl FusionParams {
    pub fn projection(&self, target: Modality) -> Option<&Projection> {
        self.projections.iter().find(|p| p.target == target)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Gate {
    pub input: ParamId,
    pub recurrent: ParamId,
    pub bias: ParamId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LstmParams {
    pub input_gate: Gate,
    pub forget_gate: Gate,
    pub output_gate: Gate,
    pub candidate: Gate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Heads {
    pub empathy: Affine,
    pub topic: Option<Affine>,
}

/// All trainable tensors of the network plus the architecture that shaped them.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub arch: ArchConfig,
    pub store: ParamStore,
    pub fusion: FusionParams,
    pub lstm: LstmParams,
    pub heads: Heads,
}

/// Serialized form of one parameter: name, shape, row-major values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRecord {
    pub name: String,
    pub shape: [usize; 2],
    pub values: Vec<f64>,
}

const GATES: [&str; 4] = ["input", "forget", "output", "candidate"];

/// Names and shapes in creation order.
fn layout(arch: &ArchConfig) -> Vec<(String, usize, usize)> {
    let d = &arch.dims;
    let anchor = arch.anchor();
    let mut out = Vec::new();
    for m in arch.modalities.pairings() {
        let base = format!("proj.{anchor}_{m}");
        out.push((format!("{base}.w"), anchor.width(d), m.width(d)));
        out.push((format!("{base}.b"), 1, m.width(d)));
    }
    let (din, h) = (arch.lstm_input_width(), arch.hidden);
    for g in GATES {
        out.push((format!("lstm.{g}.w_input"), din, h));
        out.push((format!("lstm.{g}.w_recurrent"), h, h));
        out.push((format!("lstm.{g}.b"), 1, h));
    }
    out.push(("head.empathy.w".into(), h, arch.num_classes()));
    out.push(("head.empathy.b".into(), 1, arch.num_classes()));
    if arch.has_topic_head() {
        out.push((
            "head.topic.w".into(),
            arch.topic_pool_width(),
            arch.topics_k,
        ));
        out.push(("head.topic.b".into(), 1, arch.topics_k));
    }
    out
}

impl ModelParams {
    /// Weights uniform in ±1/√fan_in (fan_in = weight rows), biases zero.
    pub fn init(arch: &ArchConfig, seed: u64) -> Result<ModelParams> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        for (name, rows, cols) in layout(arch) {
            let value = if rows == 1 {
                Matrix::zeros(1, cols)
            } else {
                let s = 1.0 / (rows as f64).sqrt();
                let data = (0..rows * cols).map(|_| rng.random_range(-s..s)).collect();
                Matrix::from_vec(rows, cols, data)?
            };
            store.add(name, value)?;
        }
        Self::from_store(arch.clone(), store)
    }

    /// All parameters set to zero.
    pub fn zeros(arch: &ArchConfig) -> Result<ModelParams> {
        arch.validate()?;
        let mut store = ParamStore::new();
        for (name, rows, cols) in layout(arch) {
            store.add(name, Matrix::zeros(rows, cols))?;
        }
        Self::from_store(arch.clone(), store)
    }

    /// Binds handles by name and checks every shape against `arch`.
    pub fn from_store(arch: ArchConfig, store: ParamStore) -> Result<ModelParams> {
        arch.validate()?;
        let expected = layout(&arch);
        if expected.len() != store.len() {
            return Err(Error::Validation(format!(
                "expected {} parameters, found {}",
                expected.len(),
                store.len()
            )));
        }
        for (name, rows, cols) in &expected {
            let id = store
                .id(name)
                .ok_or_else(|| Error::Validation(format!("missing parameter `{name}`")))?;
            let shape = store.value(id).shape();
            if shape != (*rows, *cols) {
                return Err(Error::dim(
                    format!("parameter `{name}`"),
                    shape,
                    (*rows, *cols),
                ));
            }
        }
        let id = |name: String| store.id(&name).expect("checked above");
        let affine = |base: &str| Affine {
            w: id(format!("{base}.w")),
            b: id(format!("{base}.b")),
        };
        let anchor = arch.anchor();
        let projections = arch
            .modalities
            .pairings()
            .into_iter()
            .map(|m| Projection {
                target: m,
                affine: affine(&format!("proj.{anchor}_{m}")),
            })
            .collect();
        let gate = |g: &str| Gate {
            input: id(format!("lstm.{g}.w_input")),
            recurrent: id(format!("lstm.{g}.w_recurrent")),
            bias: id(format!("lstm.{g}.b")),
        };
        let lstm = LstmParams {
            input_gate: gate("input"),
            forget_gate: gate("forget"),
            output_gate: gate("output"),
            candidate: gate("candidate"),
        };
        let heads = Heads {
            empathy: affine("head.empathy"),
            topic: arch.has_topic_head().then(|| affine("head.topic")),
        };
        Ok(ModelParams {
            fusion: FusionParams { projections },
            lstm,
            heads,
            arch,
            store,
        })
    }

    pub fn to_records(&self) -> Vec<ParamRecord> {
        self.store
            .iter()
            .map(|(_, p)| ParamRecord {
                name: p.name().to_string(),
                shape: [p.value.rows(), p.value.cols()],
                values: p.value.data().to_vec(),
            })
            .collect()
    }

    pub fn from_records(arch: ArchConfig, records: &[ParamRecord]) -> Result<ModelParams> {
        let mut store = ParamStore::new();
        for r in records {
            store.add(
                r.name.clone(),
                Matrix::from_vec(r.shape[0], r.shape[1], r.values.clone())?,
            )?;
        }
        Self::from_store(arch, store)
    }

    pub fn value(&self, id: ParamId) -> &Matrix {
        self.store.value(id)
    }

    pub fn set_value(&mut self, id: ParamId, value: Matrix) -> Result<()> {
        let p = self.store.get_mut(id);
        if p.value.shape() != value.shape() {
            return Err(Error::dim(
                format!("set `{}`", p.name()),
                p.value.shape(),
                value.shape(),
            ));
        }
        p.value = value;
        Ok(())
    }
}

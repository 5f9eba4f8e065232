use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Affine, LstmParams, Modality, ModelParams};
use crate::dataio::ConversationSample;
use crate::error::{Error, Result};
use crate::lda::TopicDistribution;
use crate::numcore::{Matrix, ParamStore, Tape, Var};

/// Whether dropout is active. Training mode carries the mask seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train { seed: u64 },
    Eval,
}

/// Tape nodes of one text-anchored bimodal fusion.
#[derive(Debug, Clone, Copy)]
pub struct BimodalVars {
    /// Pre-softmax affinities K_m·K_T'ᵀ and K_T'·K_mᵀ.
    pub affinity_m: Var,
    pub affinity_t: Var,
    /// Attention of each modality step over text tokens (n_m×n_t).
    pub attn_m: Var,
    /// Attention of each text token over modality steps (n_t×n_m).
    pub attn_t: Var,
    /// Attention context A_m·K_T' (n_m×d).
    pub context: Var,
    /// Fused feature A_T·[K_m, C_m] (n_t×2d).
    pub output: Var,
}

/// Records the cross-modal combination of projected anchor features
/// `kt` (n_t×d) with modality features `km` (n_m×d).
pub fn combine_on_tape(tape: &mut Tape, kt: Var, km: Var) -> Result<BimodalVars> {
    let kt_t = tape.transpose(kt)?;
    let km_t = tape.transpose(km)?;
    let affinity_m = tape.matmul(km, kt_t)?;
    let affinity_t = tape.matmul(kt, km_t)?;
    let attn_m = tape.row_softmax(affinity_m)?;
    let attn_t = tape.row_softmax(affinity_t)?;
    let context = tape.matmul(attn_m, kt)?;
    let joined = tape.concat_cols(&[km, context])?;
    let output = tape.matmul(attn_t, joined)?;
    Ok(BimodalVars {
        affinity_m,
        affinity_t,
        attn_m,
        attn_t,
        context,
        output,
    })
}

/// Records `tanh(x·W + b)`.
pub fn project_on_tape(tape: &mut Tape, store: &ParamStore, x: Var, proj: Affine) -> Result<Var> {
    let w = tape.param(store, proj.w);
    let b = tape.param(store, proj.b);
    let z = tape.affine(x, w, b)?;
    tape.tanh(z)
}

/// Runs a single-layer LSTM over the rows of `x` from zero state and returns
/// the final hidden state (1×h).
pub fn lstm_on_tape(
    tape: &mut Tape,
    store: &ParamStore,
    lstm: &LstmParams,
    hidden: usize,
    x: Var,
) -> Result<Var> {
    let steps = tape.value(x).rows();
    if steps == 0 {
        return Err(Error::Precondition("LSTM input has no steps".into()));
    }
    let gates = [
        lstm.input_gate,
        lstm.forget_gate,
        lstm.output_gate,
        lstm.candidate,
    ];
    // Input contributions for every step at once, one (n×h) block per gate.
    let mut projected = Vec::with_capacity(4);
    let mut recurrent = Vec::with_capacity(4);
    let mut bias = Vec::with_capacity(4);
    for g in gates {
        let w = tape.param(store, g.input);
        projected.push(tape.matmul(x, w)?);
        recurrent.push(tape.param(store, g.recurrent));
        bias.push(tape.param(store, g.bias));
    }

    let mut h = tape.constant(Matrix::zeros(1, hidden));
    let mut c = tape.constant(Matrix::zeros(1, hidden));
    for t in 0..steps {
        let mut pre = [h; 4];
        for g in 0..4 {
            let xt = tape.row(projected[g], t)?;
            let hr = tape.matmul(h, recurrent[g])?;
            let s = tape.add(xt, hr)?;
            pre[g] = tape.add_bias(s, bias[g])?;
        }
        let i = tape.sigmoid(pre[0])?;
        let f = tape.sigmoid(pre[1])?;
        let o = tape.sigmoid(pre[2])?;
        let cand = tape.tanh(pre[3])?;
        let keep = tape.mul(f, c)?;
        let write = tape.mul(i, cand)?;
        c = tape.add(keep, write)?;
        let squashed = tape.tanh(c)?;
        h = tape.mul(o, squashed)?;
    }
    Ok(h)
}

/// Inverted-dropout mask: kept entries scaled by 1/(1−rate).
pub fn dropout_mask(cols: usize, rate: f64, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keep = 1.0 / (1.0 - rate);
    let data = (0..cols)
        .map(|_| {
            if rng.random::<f64>() < rate {
                0.0
            } else {
                keep
            }
        })
        .collect();
    Matrix::from_vec(1, cols, data).expect("row mask")
}

fn head_on_tape(tape: &mut Tape, store: &ParamStore, x: Var, head: Affine) -> Result<Var> {
    let w = tape.param(store, head.w);
    let b = tape.param(store, head.b);
    let z = tape.affine(x, w, b)?;
    tape.row_softmax(z)
}

/// Output nodes of the network on some tape.
#[derive(Debug, Clone)]
pub struct PassVars {
    /// Empathy class probabilities (1×3).
    pub y_emp: Var,
    /// Predicted topic distribution (1×K), when the model has a topic head.
    pub y_dis: Option<Var>,
    pub l_agg: Var,
    pub fusions: Vec<(Modality, BimodalVars)>,
}

/// A forward pass recorded on its own tape.
#[derive(Debug)]
pub struct ForwardPass {
    pub tape: Tape,
    pub vars: PassVars,
}

impl ForwardPass {
    pub fn empathy_probs(&self) -> &[f64] {
        self.tape.value(self.vars.y_emp).data()
    }

    pub fn predicted_class(&self) -> usize {
        self.tape.value(self.vars.y_emp).argmax_row(0)
    }

    pub fn topic_distribution(&self) -> Option<TopicDistribution> {
        self.vars.y_dis.map(|v| {
            TopicDistribution::new(self.tape.value(v).data().to_vec()).expect("softmax row")
        })
    }
}

fn modality_features(sample: &ConversationSample, m: Modality) -> &Matrix {
    match m {
        Modality::Text => &sample.text,
        Modality::Audio => &sample.audio,
        Modality::Video => &sample.video,
    }
}

impl ModelParams {
    fn check_sample(&self, sample: &ConversationSample) -> Result<()> {
        for m in [Modality::Text, Modality::Audio, Modality::Video] {
            if !self.arch.modalities.contains(m) {
                continue;
            }
            let x = modality_features(sample, m);
            let want = m.width(&self.arch.dims);
            if x.cols() != want || x.rows() == 0 {
                return Err(
                    Error::dim(format!("{m} features"), x.shape(), (x.rows(), want))
                        .in_stage("input"),
                );
            }
        }
        Ok(())
    }

    /// Records the whole network on a fresh tape: projections, cross-modal
    /// combination, LSTM aggregation, the empathy head and the topic head.
    pub fn forward(&self, sample: &ConversationSample, mode: Mode) -> Result<ForwardPass> {
        let mut tape = Tape::new();
        let vars = self.record(&self.store, &mut tape, sample, mode)?;
        Ok(ForwardPass { tape, vars })
    }

    /// Like [`forward`](Self::forward) but reads parameter values from `store`
    /// (which must share this model's layout) and records onto `tape`.
    pub fn record(
        &self,
        store: &ParamStore,
        tape: &mut Tape,
        sample: &ConversationSample,
        mode: Mode,
    ) -> Result<PassVars> {
        self.check_sample(sample)?;
        let arch = &self.arch;
        let anchor = arch.anchor();
        let k_anchor = tape.constant(modality_features(sample, anchor).clone());

        let mut fusions = Vec::new();
        let mut projected = Vec::new();
        for proj in &self.fusion.projections {
            let m = proj.target;
            let km = tape.constant(modality_features(sample, m).clone());
            let kt = project_on_tape(tape, store, k_anchor, proj.affine)
                .map_err(|e| e.in_stage("text projection"))?;
            let fused =
                combine_on_tape(tape, kt, km).map_err(|e| e.in_stage("cross-modal combination"))?;
            projected.push((m, kt));
            fusions.push((m, fused));
        }

        let mut parts: Vec<Var> = fusions.iter().map(|(_, f)| f.output).collect();
        parts.push(k_anchor);
        let agg_in = tape
            .concat_cols(&parts)
            .map_err(|e| e.in_stage("aggregation"))?;
        let l_agg = lstm_on_tape(tape, store, &self.lstm, arch.hidden, agg_in)
            .map_err(|e| e.in_stage("aggregation"))?;

        let emp_in = match mode {
            Mode::Train { seed } if arch.dropout_rate > 0.0 => {
                let mask = dropout_mask(arch.hidden, arch.dropout_rate, seed);
                tape.mul_const(l_agg, mask)?
            }
            _ => l_agg,
        };
        let y_emp = head_on_tape(tape, store, emp_in, self.heads.empathy)
            .map_err(|e| e.in_stage("empathy head"))?;

        let y_dis = match self.heads.topic {
            Some(head) => {
                let source = match arch.topic_source() {
                    Some(m) => projected
                        .iter()
                        .find(|(pm, _)| *pm == m)
                        .map(|(_, v)| *v)
                        .expect("projection for topic source"),
                    None => k_anchor,
                };
                let pooled = tape.mean_rows(source)?;
                Some(
                    head_on_tape(tape, store, pooled, head)
                        .map_err(|e| e.in_stage("topic head"))?,
                )
            }
            None => None,
        };

        Ok(PassVars {
            y_emp,
            y_dis,
            l_agg,
            fusions,
        })
    }

    /// `tanh(K_T·W + b)` for the projection paired with `pairing`.
    pub fn project_text(&self, k_t: &Matrix, pairing: Modality) -> Result<Matrix> {
        let proj = self.fusion.projection(pairing).ok_or_else(|| {
            Error::Config(format!("model has no projection for the {pairing} pairing"))
        })?;
        let mut tape = Tape::new();
        let x = tape.constant(k_t.clone());
        let y = project_on_tape(&mut tape, &self.store, x, proj.affine)?;
        Ok(tape.value(y).clone())
    }

    /// Final LSTM hidden state over the feature-axis concatenation of `parts`.
    pub fn aggregate(&self, parts: &[&Matrix]) -> Result<Matrix> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = parts.iter().map(|m| tape.constant((*m).clone())).collect();
        let x = tape.concat_cols(&vars)?;
        let h = lstm_on_tape(&mut tape, &self.store, &self.lstm, self.arch.hidden, x)?;
        Ok(tape.value(h).clone())
    }

    /// Empathy class probabilities from an aggregated representation.
    pub fn predict_empathy(&self, l_agg: &Matrix, mode: Mode) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let mut x = tape.constant(l_agg.clone());
        if let Mode::Train { seed } = mode {
            if self.arch.dropout_rate > 0.0 {
                let mask = dropout_mask(l_agg.cols(), self.arch.dropout_rate, seed);
                x = tape.mul_const(x, mask)?;
            }
        }
        let y = head_on_tape(&mut tape, &self.store, x, self.heads.empathy)?;
        Ok(tape.value(y).data().to_vec())
    }

    /// Topic distribution from token-level features (mean-pooled first).
    pub fn predict_topics(&self, features: &Matrix) -> Result<TopicDistribution> {
        let head = self
            .heads
            .topic
            .ok_or_else(|| Error::Config("model has no topic head".into()))?;
        let mut tape = Tape::new();
        let x = tape.constant(features.clone());
        let pooled = tape.mean_rows(x)?;
        let y = head_on_tape(&mut tape, &self.store, pooled, head)?;
        TopicDistribution::new(tape.value(y).data().to_vec())
    }
}

/// Pure cross-modal combination, returning every intermediate.
#[derive(Debug, Clone, PartialEq)]
pub struct BimodalFeature {
    pub affinity_m: Matrix,
    pub affinity_t: Matrix,
    pub attn_m: Matrix,
    pub attn_t: Matrix,
    pub context: Matrix,
    pub output: Matrix,
}

pub fn cross_modal_combine(kt_proj: &Matrix, km: &Matrix) -> Result<BimodalFeature> {
    let mut tape = Tape::new();
    let kt = tape.constant(kt_proj.clone());
    let m = tape.constant(km.clone());
    let v = combine_on_tape(&mut tape, kt, m)?;
    Ok(BimodalFeature {
        affinity_m: tape.value(v.affinity_m).clone(),
        affinity_t: tape.value(v.affinity_t).clone(),
        attn_m: tape.value(v.attn_m).clone(),
        attn_t: tape.value(v.attn_t).clone(),
        context: tape.value(v.context).clone(),
        output: tape.value(v.output).clone(),
    })
}

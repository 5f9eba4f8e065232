//! Reverse-mode differentiation over a tape of matrix primitives.
//!
//! Every recorded operation stores its inputs by node index and its output
//! value. Inputs always precede outputs, so a single reverse sweep over the
//! node list visits each operation exactly once.

use std::collections::HashMap;

use super::{Gradients, Matrix, ParamId, ParamStore};
use crate::error::{Error, Result};

/// Reference to a node recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Param(ParamId),
    MatMul(Var, Var),
    Transpose(Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    MulConst(Var, Matrix),
    Tanh(Var),
    Sigmoid(Var),
    RowSoftmax(Var),
    ConcatCols(Vec<Var>),
    MeanRows(Var),
    Row(Var, usize),
    Sum(Var),
    /// −ln(max(p[class], floor)) of a 1×K probability row.
    Nll {
        probs: Var,
        class: usize,
        floor: f64,
    },
    /// Σ p·ln(p / max(q, floor)), or with `reverse` Σ q·ln(q / max(p, floor)),
    /// where p is the recorded row and q a constant target.
    Kl {
        pred: Var,
        target: Matrix,
        reverse: bool,
        floor: f64,
    },
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Matrix,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: HashMap<ParamId, Var>,
    consumed: bool,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, op: Op) -> Result<Var> {
        let value = self.eval(&op, None)?;
        self.nodes.push(Node { op, value });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Records a constant input. Constants receive no gradient.
    pub fn constant(&mut self, m: Matrix) -> Var {
        self.nodes.push(Node {
            op: Op::Constant,
            value: m,
        });
        Var(self.nodes.len() - 1)
    }

    /// Records a parameter leaf. Repeated requests for the same parameter
    /// return the same node, so gradients from every use accumulate.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        self.nodes.push(Node {
            op: Op::Param(id),
            value: store.value(id).clone(),
        });
        let v = Var(self.nodes.len() - 1);
        self.params.insert(id, v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.push(Op::MatMul(a, b))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        self.push(Op::Transpose(a))
    }

    /// `x·w + b` with `b` broadcast over rows.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let xw = self.matmul(x, w)?;
        self.push(Op::AddBias(xw, b))
    }

    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        self.push(Op::AddBias(x, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.push(Op::Add(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.push(Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        self.push(Op::Scale(a, c))
    }

    /// Elementwise product with a constant matrix (e.g. a dropout mask).
    pub fn mul_const(&mut self, a: Var, mask: Matrix) -> Result<Var> {
        self.push(Op::MulConst(a, mask))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.push(Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.push(Op::Sigmoid(a))
    }

    pub fn row_softmax(&mut self, a: Var) -> Result<Var> {
        self.push(Op::RowSoftmax(a))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        self.push(Op::ConcatCols(parts.to_vec()))
    }

    pub fn mean_rows(&mut self, a: Var) -> Result<Var> {
        self.push(Op::MeanRows(a))
    }

    pub fn row(&mut self, a: Var, r: usize) -> Result<Var> {
        self.push(Op::Row(a, r))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        self.push(Op::Sum(a))
    }

    pub fn nll(&mut self, probs: Var, class: usize, floor: f64) -> Result<Var> {
        self.push(Op::Nll {
            probs,
            class,
            floor,
        })
    }

    pub fn kl(&mut self, pred: Var, target: Matrix, reverse: bool, floor: f64) -> Result<Var> {
        self.push(Op::Kl {
            pred,
            target,
            reverse,
            floor,
        })
    }

    /// Evaluates `op` against either the recorded values or, during replay,
    /// the freshly recomputed ones.
    fn eval(&self, op: &Op, replayed: Option<&[Matrix]>) -> Result<Matrix> {
        let val = |v: &Var| -> &Matrix {
            match replayed {
                Some(vals) => &vals[v.0],
                None => &self.nodes[v.0].value,
            }
        };
        Ok(match op {
            Op::Constant | Op::Param(_) => unreachable!("leaves are not evaluated"),
            Op::MatMul(a, b) => val(a).matmul(val(b))?,
            Op::Transpose(a) => val(a).transpose(),
            Op::AddBias(x, b) => {
                let mut out = val(x).clone();
                out.add_row_in_place(val(b))?;
                out
            }
            Op::Add(a, b) => val(a).add(val(b))?,
            Op::Mul(a, b) => val(a).hadamard(val(b))?,
            Op::Scale(a, c) => val(a).scale(*c),
            Op::MulConst(a, m) => val(a).hadamard(m)?,
            Op::Tanh(a) => val(a).tanh(),
            Op::Sigmoid(a) => val(a).sigmoid(),
            Op::RowSoftmax(a) => val(a).row_softmax(),
            Op::ConcatCols(parts) => {
                let refs: Vec<&Matrix> = parts.iter().map(val).collect();
                Matrix::concat_cols(&refs)?
            }
            Op::MeanRows(a) => val(a).mean_rows()?,
            Op::Row(a, r) => {
                let m = val(a);
                if *r >= m.rows() {
                    return Err(Error::OutOfRange {
                        what: "row",
                        index: *r,
                        len: m.rows(),
                    });
                }
                Matrix::row_vector(m.row(*r))
            }
            Op::Sum(a) => Matrix::scalar(val(a).sum()),
            Op::Nll {
                probs,
                class,
                floor,
            } => {
                let p = val(probs);
                if p.rows() != 1 {
                    return Err(Error::dim("nll", p.shape(), (1, p.cols())));
                }
                if *class >= p.cols() {
                    return Err(Error::OutOfRange {
                        what: "class",
                        index: *class,
                        len: p.cols(),
                    });
                }
                Matrix::scalar(-floored(p.get(0, *class), *floor).ln())
            }
            Op::Kl {
                pred,
                target,
                reverse,
                floor,
            } => {
                let p = val(pred);
                if p.shape() != target.shape() || p.rows() != 1 {
                    return Err(Error::dim("kl", p.shape(), target.shape()));
                }
                let (num, den) = if *reverse {
                    (target.data(), p.data())
                } else {
                    (p.data(), target.data())
                };
                Matrix::scalar(kl_sum(num, den, *floor))
            }
        })
    }

    /// Recomputes every node from the recorded leaves and returns the value of
    /// `output`. Uses the same arithmetic as recording.
    pub fn replay(&self, output: Var) -> Result<Matrix> {
        let mut vals: Vec<Matrix> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let v = match node.op {
                Op::Constant | Op::Param(_) => node.value.clone(),
                _ => self.eval(&node.op, Some(&vals))?,
            };
            vals.push(v);
        }
        Ok(vals.swap_remove(output.0))
    }

    /// Reverse sweep from the scalar `loss`. Consumes the tape: a second call
    /// fails with [`Error::StaleTape`].
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        if self.consumed {
            return Err(Error::StaleTape);
        }
        if self.shape(loss) != (1, 1) {
            return Err(Error::dim("backward", self.shape(loss), (1, 1)));
        }
        self.consumed = true;

        let n_params = self.params.keys().map(|id| id.0 + 1).max().unwrap_or(0);
        let mut grads = Gradients::empty(n_params);
        let mut adj: Vec<Option<Matrix>> = vec![None; loss.0 + 1];
        adj[loss.0] = Some(Matrix::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = adj[idx].take() else { continue };
            let node = &self.nodes[idx];
            let y = &node.value;
            let x = |v: &Var| &self.nodes[v.0].value;
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => grads.0[id.0] = Some(g),
                Op::MatMul(a, b) => {
                    let ga = g.matmul(&x(b).transpose())?;
                    let gb = x(a).transpose().matmul(&g)?;
                    accumulate(&mut adj, *a, ga);
                    accumulate(&mut adj, *b, gb);
                }
                Op::Transpose(a) => accumulate(&mut adj, *a, g.transpose()),
                Op::AddBias(xv, b) => {
                    let mut gb = Matrix::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (o, v) in gb.data_mut().iter_mut().zip(g.row(r)) {
                            *o += v;
                        }
                    }
                    accumulate(&mut adj, *b, gb);
                    accumulate(&mut adj, *xv, g);
                }
                Op::Add(a, b) => {
                    accumulate(&mut adj, *b, g.clone());
                    accumulate(&mut adj, *a, g);
                }
                Op::Mul(a, b) => {
                    let ga = g.hadamard(x(b))?;
                    let gb = g.hadamard(x(a))?;
                    accumulate(&mut adj, *a, ga);
                    accumulate(&mut adj, *b, gb);
                }
                Op::Scale(a, c) => accumulate(&mut adj, *a, g.scale(*c)),
                Op::MulConst(a, m) => accumulate(&mut adj, *a, g.hadamard(m)?),
                Op::Tanh(a) => {
                    let ga = g.zip_with(y, "tanh backward", |g, y| g * (1.0 - y * y))?;
                    accumulate(&mut adj, *a, ga);
                }
                Op::Sigmoid(a) => {
                    let ga = g.zip_with(y, "sigmoid backward", |g, y| g * y * (1.0 - y))?;
                    accumulate(&mut adj, *a, ga);
                }
                Op::RowSoftmax(a) => {
                    let mut ga = Matrix::zeros(y.rows(), y.cols());
                    for r in 0..y.rows() {
                        let dot: f64 = g.row(r).iter().zip(y.row(r)).map(|(g, y)| g * y).sum();
                        for c in 0..y.cols() {
                            ga.set(r, c, y.get(r, c) * (g.get(r, c) - dot));
                        }
                    }
                    accumulate(&mut adj, *a, ga);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let cols = x(p).cols();
                        let mut gp = Matrix::zeros(g.rows(), cols);
                        for r in 0..g.rows() {
                            gp.data_mut()[r * cols..(r + 1) * cols]
                                .copy_from_slice(&g.row(r)[offset..offset + cols]);
                        }
                        offset += cols;
                        accumulate(&mut adj, *p, gp);
                    }
                }
                Op::MeanRows(a) => {
                    let (rows, cols) = x(a).shape();
                    let mut ga = Matrix::zeros(rows, cols);
                    let n = rows as f64;
                    for r in 0..rows {
                        for c in 0..cols {
                            ga.set(r, c, g.get(0, c) / n);
                        }
                    }
                    accumulate(&mut adj, *a, ga);
                }
                Op::Row(a, r) => {
                    let (rows, cols) = x(a).shape();
                    let mut ga = Matrix::zeros(rows, cols);
                    ga.data_mut()[r * cols..(r + 1) * cols].copy_from_slice(g.data());
                    accumulate(&mut adj, *a, ga);
                }
                Op::Sum(a) => {
                    let (rows, cols) = x(a).shape();
                    accumulate(&mut adj, *a, Matrix::filled(rows, cols, g.item()));
                }
                Op::Nll {
                    probs,
                    class,
                    floor,
                } => {
                    let p = x(probs);
                    let mut gp = Matrix::zeros(1, p.cols());
                    let pc = p.get(0, *class);
                    if pc > *floor {
                        gp.set(0, *class, -g.item() / pc);
                    }
                    accumulate(&mut adj, *probs, gp);
                }
                Op::Kl {
                    pred,
                    target,
                    reverse,
                    floor,
                } => {
                    let p = x(pred);
                    let mut gp = Matrix::zeros(1, p.cols());
                    for (j, (&pj, &qj)) in p.data().iter().zip(target.data()).enumerate() {
                        let d = if *reverse {
                            // ∂/∂p of q·ln(q / max(p, floor))
                            if pj > *floor {
                                -qj / pj
                            } else {
                                0.0
                            }
                        } else if pj > 0.0 {
                            (pj / floored(qj, *floor)).ln() + 1.0
                        } else {
                            0.0
                        };
                        gp.set(0, j, g.item() * d);
                    }
                    accumulate(&mut adj, *pred, gp);
                }
            }
        }
        Ok(grads)
    }

    /// Runs [`Tape::backward`] and adds the result into `store`'s grads.
    pub fn backward_into(&mut self, loss: Var, store: &mut ParamStore) -> Result<()> {
        let grads = self.backward(loss)?;
        store.accumulate(&grads);
        Ok(())
    }
}

fn accumulate(adj: &mut [Option<Matrix>], v: Var, g: Matrix) {
    match &mut adj[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

/// `max(v, floor)` that lets NaN through instead of hiding it.
pub(crate) fn floored(v: f64, floor: f64) -> f64 {
    if v < floor {
        floor
    } else {
        v
    }
}

/// Σ a·ln(a / max(b, floor)) with 0·ln 0 := 0.
pub(crate) fn kl_sum(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&a, &b)| {
            if a == 0.0 {
                0.0
            } else {
                a * (a / floored(b, floor)).ln()
            }
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::finite_diff_check;

    fn store_with(name: &str, m: Matrix) -> (ParamStore, ParamId) {
        let mut s = ParamStore::new();
        let id = s.add(name, m).unwrap();
        (s, id)
    }

    #[test]
    fn sum_of_squares_gradient_is_twice_the_value() {
        let p = Matrix::from_rows(&[[1.5, -2.0], [0.25, 3.0]]).unwrap();
        let (mut store, id) = store_with("p", p.clone());
        let mut tape = Tape::new();
        let v = tape.param(&store, id);
        let sq = tape.mul(v, v).unwrap();
        let loss = tape.sum(sq).unwrap();
        tape.backward_into(loss, &mut store).unwrap();
        assert_eq!(store.get(id).grad, p.scale(2.0));
    }

    #[test]
    fn softmax_cross_entropy_gradient_is_prediction_minus_onehot() {
        let z = Matrix::row_vector(&[0.3, -1.2, 2.0]);
        let (store, id) = store_with("z", z.clone());
        let build = |s: &ParamStore, tape: &mut Tape| -> Result<Var> {
            let v = tape.param(s, id);
            let p = tape.row_softmax(v)?;
            tape.nll(p, 1, 1e-12)
        };
        let mut tape = Tape::new();
        let loss = build(&store, &mut tape).unwrap();
        let grads = tape.backward(loss).unwrap();
        let y_hat = z.row_softmax();
        let g = grads.get(id).unwrap();
        for c in 0..3 {
            let expected = y_hat.get(0, c) - if c == 1 { 1.0 } else { 0.0 };
            assert!((g.get(0, c) - expected).abs() < 1e-10);
        }
        let report = finite_diff_check(&store, 1e-5, build).unwrap();
        assert!(report.max_relative_error < 1e-6, "{report:?}");
    }

    #[test]
    fn disconnected_parameter_gets_zero_gradient() {
        let mut store = ParamStore::new();
        let p = store.add("p", Matrix::filled(2, 2, 1.0)).unwrap();
        let q = store.add("q", Matrix::filled(2, 2, 1.0)).unwrap();
        let mut tape = Tape::new();
        let v = tape.param(&store, p);
        let _unused = tape.param(&store, q);
        let loss = tape.sum(v).unwrap();
        tape.backward_into(loss, &mut store).unwrap();
        assert_eq!(store.get(q).grad, Matrix::zeros(2, 2));
        assert_eq!(store.get(p).grad, Matrix::filled(2, 2, 1.0));
    }

    #[test]
    fn second_backward_is_stale() {
        let (store, id) = store_with("p", Matrix::scalar(2.0));
        let mut tape = Tape::new();
        let v = tape.param(&store, id);
        let loss = tape.sum(v).unwrap();
        tape.backward(loss).unwrap();
        assert!(matches!(tape.backward(loss), Err(Error::StaleTape)));
    }

    #[test]
    fn shared_parameter_gradients_accumulate() {
        // loss = Σ (p·x) + Σ p, p used twice
        let (store, id) = store_with("p", Matrix::from_rows(&[[2.0, -1.0]]).unwrap());
        let mut tape = Tape::new();
        let x = tape.constant(Matrix::from_rows(&[[3.0, 5.0]]).unwrap());
        let p1 = tape.param(&store, id);
        let p2 = tape.param(&store, id);
        assert_eq!(p1, p2);
        let px = tape.mul(p1, x).unwrap();
        let s = tape.add(px, p2).unwrap();
        let loss = tape.sum(s).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(id).unwrap().data(), &[4.0, 6.0]);
    }

    #[test]
    fn replay_is_bit_exact() {
        let (store, id) = store_with(
            "w",
            Matrix::from_rows(&[[0.3, -0.7, 1.1], [0.2, 0.5, -0.4]]).unwrap(),
        );
        let mut tape = Tape::new();
        let x = tape.constant(Matrix::from_rows(&[[1.0, 2.0], [-0.5, 0.25]]).unwrap());
        let w = tape.param(&store, id);
        let h = tape.matmul(x, w).unwrap();
        let t = tape.tanh(h).unwrap();
        let s = tape.row_softmax(t).unwrap();
        let m = tape.mean_rows(s).unwrap();
        let loss = tape.nll(m, 2, 1e-12).unwrap();
        let replayed = tape.replay(loss).unwrap();
        assert_eq!(replayed.item().to_bits(), tape.value(loss).item().to_bits());
    }

    #[test]
    fn kl_op_matches_closed_form() {
        let mut tape = Tape::new();
        let p = tape.constant(Matrix::row_vector(&[0.5, 0.5]));
        let kl = tape
            .kl(p, Matrix::row_vector(&[0.25, 0.75]), false, 1e-12)
            .unwrap();
        let expected = 0.5 * 2f64.ln() + 0.5 * (2.0f64 / 3.0).ln();
        assert!((tape.value(kl).item() - expected).abs() < 1e-15);
    }
}

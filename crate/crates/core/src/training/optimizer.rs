use serde::{Deserialize, Serialize};

use super::OptimizerKind;
use crate::error::{Error, Result};
use crate::numcore::{Gradients, Matrix, ParamStore};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPSILON: f64 = 1e-8;

/// Optimizer bookkeeping. Adam keeps first and second moments per parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub step: u64,
    pub first_moment: Vec<Matrix>,
    pub second_moment: Vec<Matrix>,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, store: &ParamStore) -> OptimizerState {
        let zeros = || -> Vec<Matrix> {
            store
                .iter()
                .map(|(_, p)| Matrix::zeros(p.value.rows(), p.value.cols()))
                .collect()
        };
        let (first_moment, second_moment) = match kind {
            OptimizerKind::Sgd => (Vec::new(), Vec::new()),
            OptimizerKind::Adam => (zeros(), zeros()),
        };
        OptimizerState {
            kind,
            step: 0,
            first_moment,
            second_moment,
        }
    }

    pub(crate) fn check_layout(&self, store: &ParamStore) -> Result<()> {
        if self.kind == OptimizerKind::Sgd {
            return Ok(());
        }
        let ok = self.first_moment.len() == store.len()
            && self.second_moment.len() == store.len()
            && store.iter().all(|(id, p)| {
                self.first_moment[id.index()].shape() == p.value.shape()
                    && self.second_moment[id.index()].shape() == p.value.shape()
            });
        if ok {
            Ok(())
        } else {
            Err(Error::Validation(
                "optimizer moments do not match the parameter layout".into(),
            ))
        }
    }
}

/// Applies one update to every parameter in `store`. Parameters without a
/// gradient entry are treated as having a zero gradient.
pub fn optimizer_step(
    store: &mut ParamStore,
    grads: &Gradients,
    lr: f64,
    state: &mut OptimizerState,
) -> Result<()> {
    if !grads.is_finite() {
        return Err(Error::NonFinite("gradient".into()));
    }
    state.check_layout(store)?;
    state.step += 1;
    let t = state.step as i32;
    let correct1 = 1.0 - BETA1.powi(t);
    let correct2 = 1.0 - BETA2.powi(t);
    let ids: Vec<_> = store.iter().map(|(id, _)| id).collect();
    for id in ids {
        let Some(g) = grads.get(id) else {
            if state.kind == OptimizerKind::Sgd {
                continue;
            }
            // Adam moments still decay on a zero gradient.
            let m = &mut state.first_moment[id.index()];
            let v = &mut state.second_moment[id.index()];
            let p = store.get_mut(id);
            for ((x, mi), vi) in p
                .value
                .data_mut()
                .iter_mut()
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mi *= BETA1;
                *vi *= BETA2;
                *x -= lr * (*mi / correct1) / ((*vi / correct2).sqrt() + EPSILON);
            }
            continue;
        };
        let p = store.get_mut(id);
        match state.kind {
            OptimizerKind::Sgd => {
                for (x, gi) in p.value.data_mut().iter_mut().zip(g.data()) {
                    *x -= lr * gi;
                }
            }
            OptimizerKind::Adam => {
                let m = &mut state.first_moment[id.index()];
                let v = &mut state.second_moment[id.index()];
                for (((x, gi), mi), vi) in p
                    .value
                    .data_mut()
                    .iter_mut()
                    .zip(g.data())
                    .zip(m.data_mut())
                    .zip(v.data_mut())
                {
                    *mi = BETA1 * *mi + (1.0 - BETA1) * gi;
                    *vi = BETA2 * *vi + (1.0 - BETA2) * gi * gi;
                    *x -= lr * (*mi / correct1) / ((*vi / correct2).sqrt() + EPSILON);
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::Tape;

    fn square_grad(store: &ParamStore) -> Gradients {
        let id = store.id("theta").unwrap();
        let mut tape = Tape::new();
        let x = tape.param(store, id);
        let sq = tape.mul(x, x).unwrap();
        let loss = tape.sum(sq).unwrap();
        tape.backward(loss).unwrap()
    }

    #[test]
    fn sgd_on_square_is_geometric() {
        let mut store = ParamStore::new();
        let id = store.add("theta", Matrix::scalar(1.0)).unwrap();
        let mut state = OptimizerState::new(OptimizerKind::Sgd, &store);
        let mut expected = 1.0;
        for _ in 0..20 {
            let g = square_grad(&store);
            optimizer_step(&mut store, &g, 0.1, &mut state).unwrap();
            expected *= 0.8;
            assert!((store.value(id).item() - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn adam_first_step_is_lr_sized() {
        for g in [1e-4, 0.3, 50.0, -7.0] {
            let mut store = ParamStore::new();
            let id = store
                .add("theta", Matrix::row_vector(&[2.0, -1.0]))
                .unwrap();
            let mut state = OptimizerState::new(OptimizerKind::Adam, &store);
            let mut grads = Gradients::empty(1);
            grads.0[0] = Some(Matrix::row_vector(&[g, g]));
            optimizer_step(&mut store, &grads, 1e-3, &mut state).unwrap();
            let moved = store.value(id).get(0, 0) - 2.0;
            assert!((moved.abs() - 1e-3).abs() < 1e-6, "g={g} moved {moved}");
            assert_eq!(moved.signum(), -g.signum());
        }
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        for kind in [OptimizerKind::Sgd, OptimizerKind::Adam] {
            let mut store = ParamStore::new();
            store.add("a", Matrix::row_vector(&[0.5, -0.25])).unwrap();
            store.add("b", Matrix::scalar(3.0)).unwrap();
            let before = store.clone();
            let mut state = OptimizerState::new(kind, &store);
            let mut grads = Gradients::empty(2);
            grads.0[0] = Some(Matrix::zeros(1, 2));
            for _ in 0..3 {
                optimizer_step(&mut store, &grads, 0.01, &mut state).unwrap();
            }
            assert_eq!(store, before, "{kind}");
        }
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut store = ParamStore::new();
        store.add("a", Matrix::scalar(1.0)).unwrap();
        let mut state = OptimizerState::new(OptimizerKind::Adam, &store);
        let mut grads = Gradients::empty(1);
        grads.0[0] = Some(Matrix::scalar(f64::NAN));
        let err = optimizer_step(&mut store, &grads, 0.1, &mut state).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
        assert_eq!(store.value(store.id("a").unwrap()).item(), 1.0);
    }
}

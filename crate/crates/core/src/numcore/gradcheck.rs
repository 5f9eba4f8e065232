use serde::Serialize;

use super::{ParamStore, Tape, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct ParamCheck {
    pub name: String,
    pub max_relative_error: f64,
    pub max_abs_gradient: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub per_param: Vec<ParamCheck>,
    pub max_relative_error: f64,
    pub loss: f64,
}

/// Compares tape gradients against central differences for every scalar of
/// every parameter in `params`.
///
/// `forward` must record a scalar loss on the supplied tape and be fully
/// deterministic; two baseline evaluations are compared bitwise first.
/// Relative error per entry is `|g_tape − g_fd| / max(1e-8, |g_tape| + |g_fd|)`.
pub fn finite_diff_check<F>(params: &ParamStore, eps: f64, forward: F) -> Result<GradCheckReport>
where
    F: Fn(&ParamStore, &mut Tape) -> Result<Var>,
{
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Precondition(format!(
            "finite-difference step must be positive, got {eps}"
        )));
    }
    let eval = |store: &ParamStore| -> Result<f64> {
        let mut tape = Tape::new();
        let loss = forward(store, &mut tape)?;
        Ok(tape.value(loss).item())
    };

    let first = eval(params)?;
    let second = eval(params)?;
    if first.to_bits() != second.to_bits() {
        return Err(Error::NonDeterministic { first, second });
    }

    let mut tape = Tape::new();
    let loss = forward(params, &mut tape)?;
    let grads = tape.backward(loss)?;

    let mut probe = params.clone();
    let mut per_param = Vec::with_capacity(params.len());
    let mut overall: f64 = 0.0;
    for (id, p) in params.iter() {
        let analytic = grads.dense(id, p.value.shape());
        let mut worst: f64 = 0.0;
        let mut max_abs: f64 = 0.0;
        for k in 0..p.value.data().len() {
            let orig = p.value.data()[k];
            probe.get_mut(id).value.data_mut()[k] = orig + eps;
            let plus = eval(&probe)?;
            probe.get_mut(id).value.data_mut()[k] = orig - eps;
            let minus = eval(&probe)?;
            probe.get_mut(id).value.data_mut()[k] = orig;

            let fd = (plus - minus) / (2.0 * eps);
            let g = analytic.data()[k];
            let rel = (g - fd).abs() / (g.abs() + fd.abs()).max(1e-8);
            worst = worst.max(rel);
            max_abs = max_abs.max(g.abs());
        }
        overall = overall.max(worst);
        per_param.push(ParamCheck {
            name: p.name().to_string(),
            max_relative_error: worst,
            max_abs_gradient: max_abs,
        });
    }
    Ok(GradCheckReport {
        per_param,
        max_relative_error: overall,
        loss: first,
    })
}

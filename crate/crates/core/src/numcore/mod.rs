//! Dense `f64` matrices and reverse-mode gradients over them.

mod gradcheck;
mod matrix;
mod params;
mod tape;

pub use gradcheck::{finite_diff_check, GradCheckReport, ParamCheck};
pub use matrix::Matrix;
pub use params::{Gradients, ParamId, ParamStore, Parameter};
pub use tape::{Tape, Var};

pub(crate) use tape::{floored, kl_sum};

//! Dense float64 tensors, a reverse-mode tape, and the Adam optimizer.

mod adam;
mod gradcheck;
mod param;
mod tape;
mod tensor;

pub use adam::Adam;
pub use gradcheck::{finite_diff_gradient, relative_error, ridders_derivative};
pub use param::{ParamId, ParamStore, Parameter};
pub use tape::{Activation, Tape, Var, MASK_SENTINEL};
pub use tensor::Tensor;

/// Added inside the log of `cross_entropy` so a zero probability yields a
/// large finite loss.
pub const LOG_EPSILON: f64 = 1e-12;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

//! Dense matrices, the Adam optimizer and a central-difference gradient
//! oracle used to check every hand-written backward pass.

mod adam;
mod finite_diff;
mod matrix;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use finite_diff::{finite_difference_gradient, max_relative_error};
pub use matrix::Matrix;

/// Logistic function, evaluated without overflow for large `|x|`.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

use super::Matrix;
use crate::error::{Error, Result};

/// Central-difference gradient of `loss` at `params`, one entry at a time.
pub fn finite_difference_gradient<F>(mut loss: F, params: &Matrix, epsilon: f64) -> Result<Matrix>
where
    F: FnMut(&Matrix) -> f64,
{
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
    }
    let mut probe = params.clone();
    let mut grad = Matrix::zeros(params.rows(), params.cols());
    for idx in 0..params.as_slice().len() {
        let orig = probe.as_slice()[idx];
        probe.as_mut_slice()[idx] = orig + epsilon;
        let up = loss(&probe);
        probe.as_mut_slice()[idx] = orig - epsilon;
        let down = loss(&probe);
        probe.as_mut_slice()[idx] = orig;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite loss while probing flat index {idx}"
            )));
        }
        grad.as_mut_slice()[idx] = (up - down) / (2.0 * epsilon);
    }
    Ok(grad)
}

/// Largest entrywise relative error between two gradients.
///
/// Uses `|a - b| / max(|a|, |b|, floor)`, so entries whose magnitude is below
/// `floor` are compared on an absolute scale.
pub fn max_relative_error(analytic: &Matrix, numeric: &Matrix, floor: f64) -> Result<f64> {
    if analytic.shape() != numeric.shape() {
        return Err(Error::shape(
            "max_relative_error",
            analytic.shape_str(),
            numeric.shape_str(),
        ));
    }
    Ok(analytic
        .as_slice()
        .iter()
        .zip(numeric.as_slice())
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max))
}

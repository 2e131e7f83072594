use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{Error, Result};

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("{name} must be in [0, 1), got {b}")));
            }
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::Config(format!("eps must be positive, got {}", self.eps)));
        }
        Ok(())
    }
}

/// Moment estimates for one parameter block.
#[derive(Debug, Clone)]
pub struct AdamState {
    name: String,
    m: Matrix,
    v: Matrix,
    t: u64,
}

impl AdamState {
    pub fn new(name: impl Into<String>, rows: usize, cols: usize) -> Self {
        AdamState {
            name: name.into(),
            m: Matrix::zeros(rows, cols),
            v: Matrix::zeros(rows, cols),
            t: 0,
        }
    }

    pub fn for_params(name: impl Into<String>, params: &Matrix) -> Self {
        AdamState::new(name, params.rows(), params.cols())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn first_moment(&self) -> &Matrix {
        &self.m
    }

    pub fn second_moment(&self) -> &Matrix {
        &self.v
    }
}

/// Applies one bias-corrected Adam update to `params` in place.
///
/// Nothing is modified when the call fails.
pub fn adam_step(params: &mut Matrix, grads: &Matrix, state: &mut AdamState, cfg: &AdamConfig) -> Result<()> {
    if params.shape() != grads.shape() {
        return Err(Error::shape("adam_step", params.shape_str(), grads.shape_str()));
    }
    if params.shape() != state.m.shape() {
        return Err(Error::shape(
            "adam_step",
            params.shape_str(),
            format!("state '{}' {}", state.name, state.m.shape_str()),
        ));
    }
    cfg.validate()?;
    if let Some(pos) = grads.as_slice().iter().position(|g| !g.is_finite()) {
        return Err(Error::Numeric(format!(
            "non-finite gradient in parameter block '{}' at flat index {pos}",
            state.name
        )));
    }

    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);

    let p = params.as_mut_slice();
    let m = state.m.as_mut_slice();
    let v = state.v.as_mut_slice();
    for (((p, &g), m), v) in p.iter_mut().zip(grads.as_slice()).zip(m).zip(v) {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = Matrix::filled(1, 1, 0.5);
        let g = Matrix::filled(1, 1, 2.0);
        let mut s = AdamState::for_params("w", &p);
        adam_step(&mut p, &g, &mut s, &AdamConfig::default()).unwrap();
        assert!((p.get(0, 0) - (0.5 - 0.001)).abs() < 1e-10);
        assert_eq!(s.step_count(), 1);
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut p = Matrix::from_rows(&[[1.0, -2.0], [3.5, 0.25]]).unwrap();
        let before = p.clone();
        let g = Matrix::zeros(2, 2);
        let mut s = AdamState::for_params("w", &p);
        for _ in 0..5 {
            adam_step(&mut p, &g, &mut s, &AdamConfig::default()).unwrap();
        }
        assert_eq!(p, before);
        assert_eq!(s.step_count(), 5);
    }

    // Scalar Adam written out independently of the matrix path.
    fn scalar_trace(mut w: f64, steps: usize) -> Vec<f64> {
        let (lr, b1, b2, eps) = (1e-3_f64, 0.9_f64, 0.999_f64, 1e-8_f64);
        let (mut m, mut v) = (0.0_f64, 0.0_f64);
        let mut out = Vec::new();
        for t in 1..=steps {
            let g = 2.0 * w;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t as i32));
            let vh = v / (1.0 - b2.powi(t as i32));
            w -= lr * mh / (vh.sqrt() + eps);
            out.push(w);
        }
        out
    }

    #[test]
    fn quadratic_trace_matches_scalar_reference() {
        let expected = scalar_trace(1.0, 10);
        let mut p = Matrix::filled(1, 1, 1.0);
        let mut s = AdamState::for_params("w", &p);
        for want in expected {
            let g = Matrix::filled(1, 1, 2.0 * p.get(0, 0));
            adam_step(&mut p, &g, &mut s, &AdamConfig::default()).unwrap();
            assert!((p.get(0, 0) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn errors_name_the_block() {
        let mut p = Matrix::zeros(1, 2);
        let mut s = AdamState::for_params("layer0.coeffs", &p);
        let g = Matrix::from_vec(1, 2, vec![0.0, 1.0]).unwrap();
        let mut bad = g.clone();
        bad.as_mut_slice()[1] = f64::INFINITY;
        let err = adam_step(&mut p, &bad, &mut s, &AdamConfig::default()).unwrap_err();
        assert!(err.to_string().contains("layer0.coeffs"));
        assert_eq!(s.step_count(), 0);

        let wrong = Matrix::zeros(2, 1);
        assert!(matches!(
            adam_step(&mut p, &wrong, &mut s, &AdamConfig::default()),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn second_moment_stays_non_negative() {
        let mut p = Matrix::filled(1, 3, 0.0);
        let mut s = AdamState::for_params("w", &p);
        for k in 0..20 {
            let g = Matrix::from_vec(1, 3, vec![k as f64 - 10.0, -3.0, 0.5]).unwrap();
            adam_step(&mut p, &g, &mut s, &AdamConfig::default()).unwrap();
            assert!(s.second_moment().as_slice().iter().all(|&v| v >= 0.0));
        }
    }
}

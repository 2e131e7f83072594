use crate::error::{Error, Result};
use crate::grad_engine::{sigmoid, Matrix};

/// Max-shifted softmax.
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("softmax input contains a non-finite logit".into()));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / z).collect())
}

/// Batch-mean softmax cross-entropy and its gradient `(softmax - onehot) / N`.
pub fn cross_entropy_loss(logits: &Matrix, labels: &[usize]) -> Result<(f64, Matrix)> {
    if logits.rows() != labels.len() {
        return Err(Error::shape(
            "cross_entropy_loss",
            format!("logits {}", logits.shape_str()),
            format!("{} labels", labels.len()),
        ));
    }
    let k = logits.cols();
    let n = labels.len() as f64;
    let mut grad = Matrix::zeros(logits.rows(), k);
    let mut total = 0.0;
    for (r, &y) in labels.iter().enumerate() {
        if y >= k {
            return Err(Error::Domain(format!("label {y} out of range for {k} classes")));
        }
        let row = logits.row(r);
        let p = softmax(row)?;
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        total += lse - row[y];
        let g = grad.row_mut(r);
        for c in 0..k {
            g[c] = (p[c] - if c == y { 1.0 } else { 0.0 }) / n;
        }
    }
    Ok((total / n, grad))
}

/// Batch-mean binary cross-entropy on logits, in the overflow-free form
/// `max(o, 0) - o*y + ln(1 + e^{-|o|})`. Gradient is `(sigmoid(o) - y) / N`.
pub fn bce_loss(logits: &[f64], targets: &[f64]) -> Result<(f64, Vec<f64>)> {
    if logits.len() != targets.len() {
        return Err(Error::shape("bce_loss", logits.len(), targets.len()));
    }
    if let Some(t) = targets.iter().find(|&&t| t != 0.0 && t != 1.0) {
        return Err(Error::Domain(format!("binary target must be 0 or 1, got {t}")));
    }
    let n = logits.len() as f64;
    let mut total = 0.0;
    let mut grad = Vec::with_capacity(logits.len());
    for (&o, &y) in logits.iter().zip(targets) {
        if !o.is_finite() {
            return Err(Error::Numeric("bce_loss received a non-finite logit".into()));
        }
        total += o.max(0.0) - o * y + (-o.abs()).exp().ln_1p();
        grad.push((sigmoid(o) - y) / n);
    }
    Ok((total / n, grad))
}

//! Univariate basis families used on KAN edges.
//!
//! B-splines live on a uniform knot vector over `[lo, hi]` with `g` interior
//! intervals, extended by `s` knots on each side, giving `g + 2s + 1` knots
//! and `g + s` basis functions of degree `s`. The Gaussian (RBF) and
//! reflectional-switch (RSWAF) families reuse the same count, placing
//! `g + s` centers uniformly on `[lo, hi]` with width equal to their spacing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform spline grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplineGrid {
    pub domain_lo: f64,
    pub domain_hi: f64,
    /// Number of interior intervals.
    pub grid_size: usize,
    /// B-spline degree.
    pub spline_order: usize,
}

impl SplineGrid {
    pub fn new(grid_size: usize, spline_order: usize) -> Result<Self> {
        let g = SplineGrid {
            domain_lo: -1.0,
            domain_hi: 1.0,
            grid_size,
            spline_order,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.domain_lo.is_finite() && self.domain_hi.is_finite()) || self.domain_lo >= self.domain_hi {
            return Err(Error::Config(format!(
                "grid domain must satisfy lo < hi, got [{}, {}]",
                self.domain_lo, self.domain_hi
            )));
        }
        if self.grid_size < 1 {
            return Err(Error::Config("grid size must be at least 1".into()));
        }
        if self.spline_order < 1 {
            return Err(Error::Config("spline order must be at least 1".into()));
        }
        Ok(())
    }

    pub fn num_basis(&self) -> usize {
        self.grid_size + self.spline_order
    }

    pub fn step(&self) -> f64 {
        (self.domain_hi - self.domain_lo) / self.grid_size as f64
    }

    /// Full extended knot vector, `g + 2s + 1` entries.
    pub fn knots(&self) -> Vec<f64> {
        let h = self.step();
        let s = self.spline_order as f64;
        (0..self.grid_size + 2 * self.spline_order + 1)
            .map(|i| self.domain_lo + (i as f64 - s) * h)
            .collect()
    }

    /// `num_basis` evenly spaced centers on the domain, endpoints included.
    pub fn centers(&self) -> Vec<f64> {
        let n = self.num_basis();
        let span = self.domain_hi - self.domain_lo;
        (0..n)
            .map(|i| self.domain_lo + span * i as f64 / (n - 1) as f64)
            .collect()
    }

    /// Spacing between adjacent centers.
    pub fn center_spacing(&self) -> f64 {
        (self.domain_hi - self.domain_lo) / (self.num_basis() - 1) as f64
    }
}

/// Cox–de Boor evaluation of all `g + s` basis functions at `x`.
pub fn bspline_basis(x: f64, grid: &SplineGrid) -> Result<Vec<f64>> {
    grid.validate()?;
    let knots = grid.knots();
    let mut values = vec![0.0; grid.num_basis()];
    dense_bspline(x, grid, &knots, &mut values, None);
    Ok(values)
}

/// Basis values and their derivatives with respect to `x`.
pub fn bspline_basis_with_derivative(x: f64, grid: &SplineGrid) -> Result<(Vec<f64>, Vec<f64>)> {
    grid.validate()?;
    let knots = grid.knots();
    let mut values = vec![0.0; grid.num_basis()];
    let mut deriv = vec![0.0; grid.num_basis()];
    dense_bspline(x, grid, &knots, &mut values, Some(&mut deriv));
    Ok((values, deriv))
}

fn dense_bspline(x: f64, grid: &SplineGrid, knots: &[f64], out: &mut [f64], deriv: Option<&mut [f64]>) {
    let p = grid.spline_order;
    if x >= grid.domain_lo && x < grid.domain_hi {
        let mut vals = vec![0.0; p + 1];
        let mut scratch = LocalScratch::new(p);
        match deriv {
            Some(d) => {
                let mut dv = vec![0.0; p + 1];
                let start = local_bspline(x, grid, knots, &mut scratch, &mut vals, Some(&mut dv));
                out[start..start + p + 1].copy_from_slice(&vals);
                d[start..start + p + 1].copy_from_slice(&dv);
            }
            None => {
                let start = local_bspline(x, grid, knots, &mut scratch, &mut vals, None);
                out[start..start + p + 1].copy_from_slice(&vals);
            }
        }
    } else {
        let mut scratch = vec![0.0; knots.len() - 1];
        cox_de_boor(x, knots, p, &mut scratch, out, deriv);
    }
}

/// Work buffers for [`local_bspline`].
#[derive(Debug, Clone)]
pub(crate) struct LocalScratch {
    left: Vec<f64>,
    right: Vec<f64>,
    lower: Vec<f64>,
}

impl LocalScratch {
    pub(crate) fn new(degree: usize) -> Self {
        LocalScratch {
            left: vec![0.0; degree + 1],
            right: vec![0.0; degree + 1],
            lower: vec![0.0; degree + 1],
        }
    }
}

/// Triangular Cox–de Boor on the knot span containing `x`, which must lie in
/// the grid domain (values slightly outside are evaluated on the nearest
/// interior span). Writes the `s + 1` nonzero values (and derivatives) and
/// returns the index of the first one.
pub(crate) fn local_bspline(
    x: f64,
    grid: &SplineGrid,
    knots: &[f64],
    scratch: &mut LocalScratch,
    vals: &mut [f64],
    deriv: Option<&mut [f64]>,
) -> usize {
    let p = grid.spline_order;
    let g = grid.grid_size;
    let rel = ((x - grid.domain_lo) / grid.step()).floor();
    let span = if rel < 0.0 { 0 } else { (rel as usize).min(g - 1) } + p;

    let LocalScratch { left, right, lower } = scratch;
    vals[0] = 1.0;
    for j in 1..=p {
        if j == p && deriv.is_some() {
            lower[..p].copy_from_slice(&vals[..p]);
        }
        left[j] = x - knots[span + 1 - j];
        right[j] = knots[span + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            let temp = vals[r] / (right[r + 1] + left[j - r]);
            vals[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        vals[j] = saved;
    }
    if let Some(d) = deriv {
        // B'_{i,p} = p/(t_{i+p}-t_i) B_{i,p-1} - p/(t_{i+p+1}-t_{i+1}) B_{i+1,p-1};
        // lower[r] holds B_{span-p+1+r, p-1}.
        let start = span - p;
        let pf = p as f64;
        for r in 0..=p {
            let i = start + r;
            let a = if r >= 1 { lower[r - 1] } else { 0.0 };
            let b = if r < p { lower[r] } else { 0.0 };
            d[r] = pf / (knots[i + p] - knots[i]) * a - pf / (knots[i + p + 1] - knots[i + 1]) * b;
        }
    }
    span - p
}

/// Full bottom-up Cox–de Boor table, valid for any `x`. `scratch` holds
/// `knots.len() - 1` entries.
///
/// When `deriv` is given it receives
/// `B'_{i,p} = p/(t_{i+p}-t_i) B_{i,p-1} - p/(t_{i+p+1}-t_{i+1}) B_{i+1,p-1}`.
pub(crate) fn cox_de_boor(
    x: f64,
    knots: &[f64],
    degree: usize,
    scratch: &mut [f64],
    out: &mut [f64],
    deriv: Option<&mut [f64]>,
) {
    let n0 = knots.len() - 1;
    for i in 0..n0 {
        scratch[i] = if knots[i] <= x && x < knots[i + 1] { 1.0 } else { 0.0 };
    }
    let mut deriv = deriv;
    for p in 1..=degree {
        if p == degree {
            if let Some(d) = deriv.as_deref_mut() {
                let pf = p as f64;
                for i in 0..out.len() {
                    let left = pf / (knots[i + p] - knots[i]) * scratch[i];
                    let right = pf / (knots[i + p + 1] - knots[i + 1]) * scratch[i + 1];
                    d[i] = left - right;
                }
            }
        }
        for i in 0..n0 - p {
            let left = (x - knots[i]) / (knots[i + p] - knots[i]) * scratch[i];
            let right = (knots[i + p + 1] - x) / (knots[i + p + 1] - knots[i + 1]) * scratch[i + 1];
            scratch[i] = left + right;
        }
    }
    out.copy_from_slice(&scratch[..out.len()]);
}

fn check_width(width: f64) -> Result<()> {
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::Config(format!("basis width must be positive, got {width}")));
    }
    Ok(())
}

/// Gaussian bumps `exp(-((x - c_i) / width)^2)`.
pub fn rbf_basis(x: f64, centers: &[f64], width: f64) -> Result<Vec<f64>> {
    check_width(width)?;
    if centers.is_empty() {
        return Err(Error::Config("RBF basis needs at least one center".into()));
    }
    Ok(centers
        .iter()
        .map(|c| {
            let u = (x - c) / width;
            (-u * u).exp()
        })
        .collect())
}

/// Reflectional switch functions `1 - tanh^2((x - c_i) / width)`.
pub fn rswaf_basis(x: f64, centers: &[f64], width: f64) -> Result<Vec<f64>> {
    check_width(width)?;
    if centers.is_empty() {
        return Err(Error::Config("RSWAF basis needs at least one center".into()));
    }
    Ok(centers
        .iter()
        .map(|c| {
            let t = ((x - c) / width).tanh();
            1.0 - t * t
        })
        .collect())
}

pub(crate) fn rbf_eval(x: f64, centers: &[f64], width: f64, out: &mut [f64], deriv: Option<&mut [f64]>) {
    match deriv {
        Some(d) => {
            for ((o, d), c) in out.iter_mut().zip(d.iter_mut()).zip(centers) {
                let u = (x - c) / width;
                let e = (-u * u).exp();
                *o = e;
                *d = -2.0 * u * e / width;
            }
        }
        None => {
            for (o, c) in out.iter_mut().zip(centers) {
                let u = (x - c) / width;
                *o = (-u * u).exp();
            }
        }
    }
}

pub(crate) fn rswaf_eval(x: f64, centers: &[f64], width: f64, out: &mut [f64], deriv: Option<&mut [f64]>) {
    match deriv {
        Some(d) => {
            for ((o, d), c) in out.iter_mut().zip(d.iter_mut()).zip(centers) {
                let t = ((x - c) / width).tanh();
                let sech2 = 1.0 - t * t;
                *o = sech2;
                *d = -2.0 * t * sech2 / width;
            }
        }
        None => {
            for (o, c) in out.iter_mut().zip(centers) {
                let t = ((x - c) / width).tanh();
                *o = 1.0 - t * t;
            }
        }
    }
}

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use super::basis::{local_bspline, rbf_eval, rswaf_eval, LocalScratch, SplineGrid};
use crate::error::{Error, Result};
use crate::grad_engine::{sigmoid, Matrix};

/// Inputs are clamped to `[lo + CLAMP_MARGIN, hi - CLAMP_MARGIN]` before the
/// basis is evaluated.
pub const CLAMP_MARGIN: f64 = 1e-6;

/// Basis family on each edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// B-spline curves (EfficientKAN style).
    BSpline,
    /// Gaussian radial basis (FastKAN style).
    Rbf,
    /// Reflectional switch activation `1 - tanh^2` (FasterKAN style).
    Rswaf,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::BSpline => "bspline",
            Variant::Rbf => "rbf",
            Variant::Rswaf => "rswaf",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bspline" | "b-spline" => Ok(Variant::BSpline),
            "rbf" | "fastkan" => Ok(Variant::Rbf),
            "rswaf" | "fasterkan" => Ok(Variant::Rswaf),
            other => Err(Error::Config(format!("unknown variant '{other}'"))),
        }
    }
}

#[inline]
fn silu(x: f64) -> f64 {
    x * sigmoid(x)
}

#[inline]
fn silu_grad(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}

/// One KAN layer: `out[j] = sum_i <coeffs[j][i], basis(x_i)> + base[j][i] * silu(x_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KanLayer {
    in_dim: usize,
    out_dim: usize,
    variant: Variant,
    grid: SplineGrid,
    use_base: bool,
    /// `(out_dim * in_dim) x num_basis`, row `j * in_dim + i` is edge `(i -> j)`.
    spline_coeffs: Matrix,
    /// `out_dim x in_dim`.
    base_weights: Matrix,
    knots: Vec<f64>,
    centers: Vec<f64>,
    width: f64,
    /// Basis values that can be nonzero at one point: `s + 1` for B-splines,
    /// all of them for the radial families.
    support: usize,
}

/// Forward state needed by [`KanLayer::backward`].
#[derive(Debug, Clone)]
pub struct LayerCache {
    in_dim: usize,
    out_dim: usize,
    num_basis: usize,
    input: Matrix,
    clamped: Matrix,
    /// `support` values per (sample, input), starting at `starts[..]`.
    basis: Vec<f64>,
    starts: Vec<usize>,
}

/// Precomputed basis values of a fixed input matrix, for layers whose input
/// does not change between epochs (the first layer during training).
#[derive(Debug, Clone)]
pub struct BasisTable {
    variant: Variant,
    grid: SplineGrid,
    in_dim: usize,
    support: usize,
    clamped: Matrix,
    basis: Vec<f64>,
    starts: Vec<usize>,
}

impl BasisTable {
    pub fn rows(&self) -> usize {
        self.clamped.rows()
    }
}

/// Gradients of a layer's parameters, shaped like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub spline_coeffs: Matrix,
    pub base_weights: Matrix,
}

impl KanLayer {
    /// A layer with every parameter set to zero.
    pub fn zeros(in_dim: usize, out_dim: usize, variant: Variant, grid: SplineGrid, use_base: bool) -> Result<Self> {
        grid.validate()?;
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::Config(format!(
                "layer dimensions must be positive, got {in_dim} -> {out_dim}"
            )));
        }
        let nb = grid.num_basis();
        Ok(KanLayer {
            in_dim,
            out_dim,
            variant,
            grid,
            use_base,
            spline_coeffs: Matrix::zeros(out_dim * in_dim, nb),
            base_weights: Matrix::zeros(out_dim, in_dim),
            knots: grid.knots(),
            centers: grid.centers(),
            width: grid.center_spacing(),
            support: match variant {
                Variant::BSpline => grid.spline_order + 1,
                Variant::Rbf | Variant::Rswaf => nb,
            },
        })
    }

    /// Glorot-uniform base weights, `N(0, 0.1 / sqrt(num_basis))` spline
    /// coefficients.
    pub fn init_random<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let bound = (6.0 / (self.in_dim + self.out_dim) as f64).sqrt();
        let uniform = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        for w in self.base_weights.as_mut_slice() {
            *w = uniform.sample(rng);
        }
        let std = 0.1 / (self.num_basis() as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("positive std");
        for c in self.spline_coeffs.as_mut_slice() {
            *c = normal.sample(rng);
        }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn grid(&self) -> &SplineGrid {
        &self.grid
    }

    pub fn use_base(&self) -> bool {
        self.use_base
    }

    pub fn num_basis(&self) -> usize {
        self.grid.num_basis()
    }

    pub fn spline_coeffs(&self) -> &Matrix {
        &self.spline_coeffs
    }

    pub fn spline_coeffs_mut(&mut self) -> &mut Matrix {
        &mut self.spline_coeffs
    }

    pub fn base_weights(&self) -> &Matrix {
        &self.base_weights
    }

    pub fn base_weights_mut(&mut self) -> &mut Matrix {
        &mut self.base_weights
    }

    /// Coefficient vector of edge `input -> output`.
    pub fn edge_coeffs(&self, output: usize, input: usize) -> &[f64] {
        self.spline_coeffs.row(output * self.in_dim + input)
    }

    pub(crate) fn set_parameters(&mut self, spline_coeffs: Matrix, base_weights: Matrix) -> Result<()> {
        if spline_coeffs.shape() != self.spline_coeffs.shape() {
            return Err(Error::shape(
                "KanLayer::set_parameters",
                self.spline_coeffs.shape_str(),
                spline_coeffs.shape_str(),
            ));
        }
        if base_weights.shape() != self.base_weights.shape() {
            return Err(Error::shape(
                "KanLayer::set_parameters",
                self.base_weights.shape_str(),
                base_weights.shape_str(),
            ));
        }
        self.spline_coeffs = spline_coeffs;
        self.base_weights = base_weights;
        Ok(())
    }

    fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.grid.domain_lo + CLAMP_MARGIN, self.grid.domain_hi - CLAMP_MARGIN)
    }

    /// Writes the `support` possibly-nonzero basis values at clamped `x` and
    /// returns the index of the first.
    fn eval_local(&self, x: f64, scratch: &mut LocalScratch, vals: &mut [f64], deriv: Option<&mut [f64]>) -> usize {
        match self.variant {
            Variant::BSpline => local_bspline(x, &self.grid, &self.knots, scratch, vals, deriv),
            Variant::Rbf => {
                rbf_eval(x, &self.centers, self.width, vals, deriv);
                0
            }
            Variant::Rswaf => {
                rswaf_eval(x, &self.centers, self.width, vals, deriv);
                0
            }
        }
    }

    /// Basis values of this layer's family at `x` (after clamping).
    pub fn basis_at(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.num_basis()];
        let mut vals = vec![0.0; self.support];
        let mut scratch = LocalScratch::new(self.grid.spline_order);
        let start = self.eval_local(self.clamp(x), &mut scratch, &mut vals, None);
        out[start..start + self.support].copy_from_slice(&vals);
        out
    }

    fn check_input(&self, input: &Matrix) -> Result<()> {
        if input.cols() != self.in_dim {
            return Err(Error::shape(
                "kan_layer_forward",
                format!("layer input dim {}", self.in_dim),
                format!("batch {}", input.shape_str()),
            ));
        }
        Ok(())
    }

    /// Inference-only forward pass.
    pub fn forward(&self, input: &Matrix) -> Result<Matrix> {
        Ok(self.forward_impl(input, false, None)?.0)
    }

    /// Forward pass that also returns the state needed by `backward`.
    pub fn forward_train(&self, input: &Matrix) -> Result<(Matrix, LayerCache)> {
        let (out, cache) = self.forward_impl(input, true, None)?;
        Ok((out, cache.expect("cache requested")))
    }

    /// Basis values of every row of `input`, for reuse with
    /// [`KanLayer::forward_train_rows`].
    pub fn basis_table(&self, input: &Matrix) -> Result<BasisTable> {
        self.check_input(input)?;
        let sup = self.support;
        let n = input.rows() * self.in_dim;
        let mut clamped = Matrix::zeros(input.rows(), self.in_dim);
        let mut basis = vec![0.0; n * sup];
        let mut starts = vec![0usize; n];
        let mut scratch = LocalScratch::new(self.grid.spline_order);
        for b in 0..input.rows() {
            for i in 0..self.in_dim {
                let xc = self.clamp(input.get(b, i));
                clamped.set(b, i, xc);
                let cell = b * self.in_dim + i;
                starts[cell] = self.eval_local(xc, &mut scratch, &mut basis[cell * sup..(cell + 1) * sup], None);
            }
        }
        Ok(BasisTable {
            variant: self.variant,
            grid: self.grid,
            in_dim: self.in_dim,
            support: sup,
            clamped,
            basis,
            starts,
        })
    }

    /// [`KanLayer::forward_train`] on `input`, whose row `b` is row `rows[b]`
    /// of the matrix `table` was built from.
    pub fn forward_train_rows(
        &self,
        input: &Matrix,
        table: &BasisTable,
        rows: &[usize],
    ) -> Result<(Matrix, LayerCache)> {
        if table.variant != self.variant
            || table.grid != self.grid
            || table.in_dim != self.in_dim
            || table.support != self.support
        {
            return Err(Error::State(format!(
                "basis table for a {} layer with {} inputs used with a {} layer with {} inputs",
                table.variant, table.in_dim, self.variant, self.in_dim
            )));
        }
        if rows.len() != input.rows() || rows.iter().any(|&r| r >= table.rows()) {
            return Err(Error::State(format!(
                "{} row indices for a {}-row batch into a {}-row table",
                rows.len(),
                input.rows(),
                table.rows()
            )));
        }
        let (out, cache) = self.forward_impl(input, true, Some((table, rows)))?;
        Ok((out, cache.expect("cache requested")))
    }

    fn forward_impl(
        &self,
        input: &Matrix,
        keep: bool,
        table: Option<(&BasisTable, &[usize])>,
    ) -> Result<(Matrix, Option<LayerCache>)> {
        self.check_input(input)?;
        let sup = self.support;
        let (batch, in_dim) = (input.rows(), self.in_dim);
        let mut out = Matrix::zeros(batch, self.out_dim);
        let mut clamped = Matrix::zeros(batch, in_dim);
        let cap = if keep { batch * in_dim } else { 0 };
        let mut basis_all = Vec::with_capacity(cap * sup);
        let mut starts_all = Vec::with_capacity(cap);
        let mut basis = vec![0.0; in_dim * sup];
        let mut starts = vec![0usize; in_dim];
        let mut act = vec![0.0; in_dim];
        let mut scratch = LocalScratch::new(self.grid.spline_order);

        for b in 0..batch {
            let x_row = input.row(b);
            match table {
                Some((t, rows)) => {
                    let r = rows[b];
                    clamped.row_mut(b).copy_from_slice(t.clamped.row(r));
                    starts.copy_from_slice(&t.starts[r * in_dim..(r + 1) * in_dim]);
                    basis.copy_from_slice(&t.basis[r * in_dim * sup..(r + 1) * in_dim * sup]);
                }
                None => {
                    for i in 0..in_dim {
                        let xc = self.clamp(x_row[i]);
                        clamped.set(b, i, xc);
                        starts[i] = self.eval_local(xc, &mut scratch, &mut basis[i * sup..(i + 1) * sup], None);
                    }
                }
            }
            for i in 0..in_dim {
                act[i] = if self.use_base { silu(x_row[i]) } else { 0.0 };
            }
            let out_row = out.row_mut(b);
            for (j, o) in out_row.iter_mut().enumerate() {
                let mut acc = 0.0;
                for i in 0..in_dim {
                    let coeffs = &self.spline_coeffs.row(j * in_dim + i)[starts[i]..starts[i] + sup];
                    let bvals = &basis[i * sup..(i + 1) * sup];
                    let mut dot = 0.0;
                    for k in 0..sup {
                        dot += coeffs[k] * bvals[k];
                    }
                    acc += dot;
                    if self.use_base {
                        acc += self.base_weights.get(j, i) * act[i];
                    }
                }
                *o = acc;
            }
            if keep {
                basis_all.extend_from_slice(&basis);
                starts_all.extend_from_slice(&starts);
            }
        }
        if !out.is_finite() {
            return Err(Error::Numeric("non-finite layer output".into()));
        }
        let cache = keep.then(|| LayerCache {
            in_dim,
            out_dim: self.out_dim,
            num_basis: self.num_basis(),
            input: input.clone(),
            clamped,
            basis: basis_all,
            starts: starts_all,
        });
        Ok((out, cache))
    }

    /// Gradients with respect to the layer input and parameters.
    pub fn backward(&self, cache: &LayerCache, upstream: &Matrix) -> Result<(Matrix, LayerGrads)> {
        let (gi, g) = self.backward_impl(cache, upstream, true)?;
        Ok((gi.expect("input gradient requested"), g))
    }

    /// Parameter gradients only; skips the input-gradient work.
    pub fn param_gradients(&self, cache: &LayerCache, upstream: &Matrix) -> Result<LayerGrads> {
        Ok(self.backward_impl(cache, upstream, false)?.1)
    }

    fn backward_impl(
        &self,
        cache: &LayerCache,
        upstream: &Matrix,
        want_input: bool,
    ) -> Result<(Option<Matrix>, LayerGrads)> {
        let nb = self.num_basis();
        if cache.in_dim != self.in_dim || cache.out_dim != self.out_dim || cache.num_basis != nb {
            return Err(Error::State(format!(
                "cache from a {}->{} layer ({} basis) used with a {}->{} layer ({} basis)",
                cache.in_dim, cache.out_dim, cache.num_basis, self.in_dim, self.out_dim, nb
            )));
        }
        let batch = cache.input.rows();
        if upstream.rows() != batch || upstream.cols() != self.out_dim {
            return Err(Error::State(format!(
                "upstream gradient {} does not match cached forward batch {}x{}",
                upstream.shape_str(),
                batch,
                self.out_dim
            )));
        }

        let sup = self.support;
        let in_dim = self.in_dim;
        let mut grad_in = Matrix::zeros(if want_input { batch } else { 0 }, in_dim);
        let mut grad_coeffs = Matrix::zeros(self.out_dim * in_dim, nb);
        let mut grad_base = Matrix::zeros(self.out_dim, in_dim);
        let mut dbasis = vec![0.0; sup];
        let mut vals = vec![0.0; sup];
        let mut scratch = LocalScratch::new(self.grid.spline_order);

        for b in 0..batch {
            let up = upstream.row(b);
            for i in 0..in_dim {
                let x = cache.input.get(b, i);
                let cell = b * in_dim + i;
                let start = cache.starts[cell];
                let basis = &cache.basis[cell * sup..(cell + 1) * sup];
                let inside = want_input && x == cache.clamped.get(b, i);
                if inside {
                    self.eval_local(x, &mut scratch, &mut vals, Some(&mut dbasis));
                }
                let act = if self.use_base { silu(x) } else { 0.0 };
                let dact = if want_input && self.use_base { silu_grad(x) } else { 0.0 };
                let mut gx = 0.0;
                for (j, &u) in up.iter().enumerate() {
                    let row = j * in_dim + i;
                    let gc = &mut grad_coeffs.row_mut(row)[start..start + sup];
                    for k in 0..sup {
                        gc[k] += u * basis[k];
                    }
                    if inside {
                        let coeffs = &self.spline_coeffs.row(row)[start..start + sup];
                        let mut dot = 0.0;
                        for k in 0..sup {
                            dot += coeffs[k] * dbasis[k];
                        }
                        gx += u * dot;
                    }
                    if self.use_base {
                        grad_base.set(j, i, grad_base.get(j, i) + u * act);
                        gx += u * self.base_weights.get(j, i) * dact;
                    }
                }
                if want_input {
                    grad_in.set(b, i, gx);
                }
            }
        }
        Ok((
            want_input.then_some(grad_in),
            LayerGrads {
                spline_coeffs: grad_coeffs,
                base_weights: grad_base,
            },
        ))
    }
}

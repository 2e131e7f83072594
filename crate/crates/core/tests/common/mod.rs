#![allow(dead_code)]

use kan_ecoc::ecoc::{Codeword, CodingMatrix};
use kan_ecoc::grad_engine::{finite_difference_gradient, max_relative_error, Matrix};
use kan_ecoc::layers::{KanNetwork, NetworkSpec, SplineGrid, Variant, CLAMP_MARGIN};
use kan_ecoc::rng::seeded;
use kan_ecoc::train::{bce_loss, cross_entropy_loss};
use rand::Rng;

/// Knots rebuilt from the grid definition, independent of the library.
pub fn oracle_knots(g: usize, s: usize) -> Vec<f64> {
    let h = 2.0 / g as f64;
    (0..=g + 2 * s).map(|i| -1.0 + (i as f64 - s as f64) * h).collect()
}

/// Textbook recursion, one basis function at a time.
pub fn oracle_basis(i: usize, p: usize, x: f64, t: &[f64]) -> f64 {
    if p == 0 {
        return if t[i] <= x && x < t[i + 1] { 1.0 } else { 0.0 };
    }
    let left = (x - t[i]) / (t[i + p] - t[i]) * oracle_basis(i, p - 1, x, t);
    let right = (t[i + p + 1] - x) / (t[i + p + 1] - t[i + 1]) * oracle_basis(i + 1, p - 1, x, t);
    left + right
}

/// d/dx of [`oracle_basis`] via the standard degree-lowering identity.
pub fn oracle_basis_deriv(i: usize, p: usize, x: f64, t: &[f64]) -> f64 {
    if p == 0 {
        return 0.0;
    }
    let pf = p as f64;
    pf / (t[i + p] - t[i]) * oracle_basis(i, p - 1, x, t)
        - pf / (t[i + p + 1] - t[i + 1]) * oracle_basis(i + 1, p - 1, x, t)
}

pub fn oracle_all(x: f64, g: usize, s: usize) -> Vec<f64> {
    let t = oracle_knots(g, s);
    (0..g + s).map(|i| oracle_basis(i, s, x, &t)).collect()
}

/// Nearest codeword by exhaustive scan; first index wins ties.
pub fn brute_force_decode(c: &Codeword, m: &CodingMatrix) -> usize {
    let mut best = (usize::MAX, 0);
    for k in 0..m.num_classes() {
        let d = m.row(k).iter().zip(c.bits()).filter(|(a, b)| a != b).count();
        if d < best.0 {
            best = (d, k);
        }
    }
    best.1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    CrossEntropy,
    Bce,
}

pub struct GradCase {
    pub net: KanNetwork,
    pub x: Matrix,
    pub labels: Vec<usize>,
    pub targets: Vec<f64>,
    pub loss: LossKind,
}

pub const GRAD_EPS: f64 = 1e-5;
pub const GRAD_FLOOR: f64 = 1e-6;
/// Inputs this close to a knot or the clamp edge are resampled: the loss is
/// not smooth there and central differences straddle the kink.
const KINK_MARGIN: f64 = 1e-4;

impl GradCase {
    /// A freshly initialized 3 -> 4 -> out network and a batch of 6 inputs
    /// away from kinks.
    pub fn new(variant: Variant, g: usize, s: usize, loss: LossKind, seed: u64) -> GradCase {
        Self::with_coeff_range(variant, g, s, loss, seed, None)
    }

    /// As [`GradCase::new`], optionally redrawing every spline coefficient
    /// from `U(-r, r)` so the spline path dominates.
    pub fn with_coeff_range(
        variant: Variant,
        g: usize,
        s: usize,
        loss: LossKind,
        seed: u64,
        coeff_range: Option<f64>,
    ) -> GradCase {
        let out = if loss == LossKind::CrossEntropy { 3 } else { 1 };
        let spec = NetworkSpec::new(vec![4], SplineGrid::new(g, s).unwrap(), variant);
        let mut net = spec.build(3, out, seed).unwrap();
        let mut rng = seeded(seed ^ 0x5eed);
        if let Some(r) = coeff_range {
            for l in net.layers_mut() {
                for c in l.spline_coeffs_mut().as_mut_slice() {
                    *c = rng.random_range(-r..r);
                }
            }
        }
        let batch = 6;
        for _ in 0..1000 {
            let data: Vec<f64> = (0..batch * 3).map(|_| rng.random_range(-0.95..0.95)).collect();
            let x = Matrix::from_vec(batch, 3, data).unwrap();
            if !near_kink(&net, &x) {
                let labels = (0..batch).map(|_| rng.random_range(0..3)).collect();
                let targets = (0..batch).map(|_| rng.random_range(0..2) as f64).collect();
                return GradCase {
                    net,
                    x,
                    labels,
                    targets,
                    loss,
                };
            }
        }
        panic!("could not draw a kink-free batch");
    }

    pub fn loss_of(&self, net: &KanNetwork, x: &Matrix) -> f64 {
        let logits = net.forward(x).unwrap();
        self.loss_and_grad(&logits).0
    }

    fn loss_and_grad(&self, logits: &Matrix) -> (f64, Matrix) {
        match self.loss {
            LossKind::CrossEntropy => cross_entropy_loss(logits, &self.labels).unwrap(),
            LossKind::Bce => {
                let (l, g) = bce_loss(logits.as_slice(), &self.targets).unwrap();
                (l, Matrix::from_vec(g.len(), 1, g).unwrap())
            }
        }
    }

    /// Worst relative error over every parameter block and the input.
    pub fn max_error(&self) -> f64 {
        self.max_error_at(GRAD_EPS)
    }

    pub fn max_error_at(&self, eps: f64) -> f64 {
        let (logits, cache) = self.net.forward_train(&self.x).unwrap();
        let (_, up) = self.loss_and_grad(&logits);
        let (gin, grads) = self.net.backward(&cache, &up).unwrap();
        let mut worst = 0.0f64;

        let num = finite_difference_gradient(|x| self.loss_of(&self.net, x), &self.x, eps).unwrap();
        worst = worst.max(max_relative_error(&gin, &num, GRAD_FLOOR).unwrap());

        for (li, g) in grads.iter().enumerate() {
            let layer = &self.net.layers()[li];
            let num = finite_difference_gradient(
                |p| {
                    let mut n = self.net.clone();
                    *n.layers_mut()[li].spline_coeffs_mut() = p.clone();
                    self.loss_of(&n, &self.x)
                },
                layer.spline_coeffs(),
                eps,
            )
            .unwrap();
            worst = worst.max(max_relative_error(&g.spline_coeffs, &num, GRAD_FLOOR).unwrap());

            let num = finite_difference_gradient(
                |p| {
                    let mut n = self.net.clone();
                    *n.layers_mut()[li].base_weights_mut() = p.clone();
                    self.loss_of(&n, &self.x)
                },
                layer.base_weights(),
                eps,
            )
            .unwrap();
            worst = worst.max(max_relative_error(&g.base_weights, &num, GRAD_FLOOR).unwrap());
        }
        worst
    }
}

fn near_kink(net: &KanNetwork, x: &Matrix) -> bool {
    let mut h = x.clone();
    for layer in net.layers() {
        let grid = layer.grid();
        let lo = grid.domain_lo + CLAMP_MARGIN;
        let hi = grid.domain_hi - CLAMP_MARGIN;
        let mut kinks = vec![lo, hi];
        if layer.variant() == Variant::BSpline {
            kinks.extend(grid.knots());
        }
        if h.as_slice()
            .iter()
            .any(|v| kinks.iter().any(|k| (v - k).abs() < KINK_MARGIN))
        {
            return true;
        }
        h = layer.forward(&h).unwrap();
    }
    false
}

/// Every (variant, g, s) the gradient suite covers.
pub fn grad_configs() -> Vec<(Variant, usize, usize)> {
    let mut v = Vec::new();
    for variant in [Variant::BSpline, Variant::Rbf, Variant::Rswaf] {
        for g in [3, 5, 10] {
            for s in [1, 2, 3] {
                v.push((variant, g, s));
            }
        }
    }
    v
}

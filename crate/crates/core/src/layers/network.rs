use serde::{Deserialize, Serialize};

use super::basis::SplineGrid;
use super::layer::{BasisTable, KanLayer, LayerCache, LayerGrads, Variant};
use crate::error::{Error, Result};
use crate::grad_engine::Matrix;
use crate::rng::seeded;

/// Architecture shared by every network in an experiment; input and output
/// widths are supplied when it is instantiated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub hidden_dims: Vec<usize>,
    pub grid: SplineGrid,
    pub variant: Variant,
    pub use_base: bool,
}

impl NetworkSpec {
    pub fn new(hidden_dims: Vec<usize>, grid: SplineGrid, variant: Variant) -> Self {
        NetworkSpec {
            hidden_dims,
            grid,
            variant,
            use_base: true,
        }
    }

    pub fn build(&self, in_dim: usize, out_dim: usize, seed: u64) -> Result<KanNetwork> {
        build_layers(
            &self.hidden_dims,
            in_dim,
            out_dim,
            self.grid,
            self.variant,
            seed,
            self.use_base,
        )
    }
}

/// Stack of KAN layers whose widths chain.
#[derive(Debug, Clone, PartialEq)]
pub struct KanNetwork {
    layers: Vec<KanLayer>,
}

/// Per-layer forward caches of one training step.
#[derive(Debug, Clone)]
pub struct NetworkCache {
    layers: Vec<LayerCache>,
}

/// Builds `in_dim -> hidden_dims... -> out_dim` with seeded initialization.
pub fn build_network(
    hidden_dims: &[usize],
    in_dim: usize,
    out_dim: usize,
    grid: SplineGrid,
    variant: Variant,
    seed: u64,
) -> Result<KanNetwork> {
    build_layers(hidden_dims, in_dim, out_dim, grid, variant, seed, true)
}

fn build_layers(
    hidden_dims: &[usize],
    in_dim: usize,
    out_dim: usize,
    grid: SplineGrid,
    variant: Variant,
    seed: u64,
    use_base: bool,
) -> Result<KanNetwork> {
    grid.validate()?;
    let mut dims = Vec::with_capacity(hidden_dims.len() + 2);
    dims.push(in_dim);
    dims.extend_from_slice(hidden_dims);
    dims.push(out_dim);
    if let Some(d) = dims.iter().find(|&&d| d == 0) {
        return Err(Error::Config(format!("network dims must be >= 1, got {d} in {dims:?}")));
    }
    let mut rng = seeded(seed);
    let layers = dims
        .windows(2)
        .map(|w| {
            let mut l = KanLayer::zeros(w[0], w[1], variant, grid, use_base)?;
            l.init_random(&mut rng);
            if !use_base {
                l.base_weights_mut().as_mut_slice().fill(0.0);
            }
            Ok(l)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(KanNetwork { layers })
}

impl KanNetwork {
    pub fn from_layers(layers: Vec<KanLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        for (i, w) in layers.windows(2).enumerate() {
            if w[0].out_dim() != w[1].in_dim() {
                return Err(Error::shape(
                    "KanNetwork::from_layers",
                    format!("layer {i} out_dim {}", w[0].out_dim()),
                    format!("layer {} in_dim {}", i + 1, w[1].in_dim()),
                ));
            }
        }
        Ok(KanNetwork { layers })
    }

    pub fn layers(&self) -> &[KanLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [KanLayer] {
        &mut self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    /// Layer widths including input and output.
    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.in_dim())
            .chain(self.layers.iter().map(|l| l.out_dim()))
            .collect()
    }

    pub fn num_parameters(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.spline_coeffs().as_slice().len() + l.base_weights().as_slice().len())
            .sum()
    }

    pub fn forward(&self, input: &Matrix) -> Result<Matrix> {
        let mut x = self.layers[0].forward(input)?;
        for l in &self.layers[1..] {
            x = l.forward(&x)?;
        }
        Ok(x)
    }

    pub fn forward_train(&self, input: &Matrix) -> Result<(Matrix, NetworkCache)> {
        let mut caches = Vec::with_capacity(self.layers.len());
        let (mut x, c) = self.layers[0].forward_train(input)?;
        caches.push(c);
        for l in &self.layers[1..] {
            let (y, c) = l.forward_train(&x)?;
            caches.push(c);
            x = y;
        }
        Ok((x, NetworkCache { layers: caches }))
    }

    /// [`KanNetwork::forward_train`] with the first layer's basis values taken
    /// from `table`; `rows` maps batch rows to table rows.
    pub fn forward_train_rows(
        &self,
        input: &Matrix,
        table: &BasisTable,
        rows: &[usize],
    ) -> Result<(Matrix, NetworkCache)> {
        let mut caches = Vec::with_capacity(self.layers.len());
        let (mut x, c) = self.layers[0].forward_train_rows(input, table, rows)?;
        caches.push(c);
        for l in &self.layers[1..] {
            let (y, c) = l.forward_train(&x)?;
            caches.push(c);
            x = y;
        }
        Ok((x, NetworkCache { layers: caches }))
    }

    /// Returns the input gradient and per-layer parameter gradients.
    pub fn backward(&self, cache: &NetworkCache, upstream: &Matrix) -> Result<(Matrix, Vec<LayerGrads>)> {
        if cache.layers.len() != self.layers.len() {
            return Err(Error::State(format!(
                "cache has {} layers, network has {}",
                cache.layers.len(),
                self.layers.len()
            )));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut g = upstream.clone();
        for (l, c) in self.layers.iter().zip(&cache.layers).rev() {
            let (gi, lg) = l.backward(c, &g)?;
            grads.push(lg);
            g = gi;
        }
        grads.reverse();
        Ok((g, grads))
    }

    /// Parameter gradients only; the first layer skips its input gradient.
    pub fn param_gradients(&self, cache: &NetworkCache, upstream: &Matrix) -> Result<Vec<LayerGrads>> {
        if cache.layers.len() != self.layers.len() {
            return Err(Error::State(format!(
                "cache has {} layers, network has {}",
                cache.layers.len(),
                self.layers.len()
            )));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut g = upstream.clone();
        for (idx, (l, c)) in self.layers.iter().zip(&cache.layers).enumerate().rev() {
            if idx == 0 {
                grads.push(l.param_gradients(c, &g)?);
            } else {
                let (gi, lg) = l.backward(c, &g)?;
                grads.push(lg);
                g = gi;
            }
        }
        grads.reverse();
        Ok(grads)
    }
}

//! Self-describing JSON model files.
//!
//! Every parameter array is stored row-major next to an explicit shape, and
//! floats are written in shortest round-trip form, so save/load is bit-exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::basis::SplineGrid;
use super::layer::{KanLayer, Variant};
use super::network::KanNetwork;
use crate::error::{Error, Result};
use crate::grad_engine::Matrix;

pub const MODEL_FORMAT: &str = "kan-ecoc-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShapedArray {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LayerRecord {
    in_dim: usize,
    out_dim: usize,
    spline_coeffs: ShapedArray,
    base_weights: ShapedArray,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelRecord {
    format: String,
    version: u32,
    variant: Variant,
    grid: SplineGrid,
    use_base: bool,
    dims: Vec<usize>,
    layers: Vec<LayerRecord>,
}

pub fn network_to_json(net: &KanNetwork) -> Result<String> {
    let first = &net.layers()[0];
    let record = ModelRecord {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        variant: first.variant(),
        grid: *first.grid(),
        use_base: first.use_base(),
        dims: net.dims(),
        layers: net
            .layers()
            .iter()
            .map(|l| LayerRecord {
                in_dim: l.in_dim(),
                out_dim: l.out_dim(),
                spline_coeffs: ShapedArray {
                    shape: vec![l.out_dim(), l.in_dim(), l.num_basis()],
                    data: l.spline_coeffs().as_slice().to_vec(),
                },
                base_weights: ShapedArray {
                    shape: vec![l.out_dim(), l.in_dim()],
                    data: l.base_weights().as_slice().to_vec(),
                },
            })
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&record)?)
}

pub fn network_from_json(text: &str) -> Result<KanNetwork> {
    let record: ModelRecord = serde_json::from_str(text)?;
    if record.format != MODEL_FORMAT || record.version != MODEL_VERSION {
        return Err(Error::Serde(format!(
            "unsupported model format {} v{}",
            record.format, record.version
        )));
    }
    record.grid.validate()?;
    let nb = record.grid.num_basis();
    let mut layers = Vec::with_capacity(record.layers.len());
    for (idx, lr) in record.layers.into_iter().enumerate() {
        let want_c = vec![lr.out_dim, lr.in_dim, nb];
        let want_b = vec![lr.out_dim, lr.in_dim];
        if lr.spline_coeffs.shape != want_c || lr.base_weights.shape != want_b {
            return Err(Error::shape(
                "network_from_json",
                format!("layer {idx} expects {want_c:?} / {want_b:?}"),
                format!("{:?} / {:?}", lr.spline_coeffs.shape, lr.base_weights.shape),
            ));
        }
        let coeffs = Matrix::from_vec(lr.out_dim * lr.in_dim, nb, lr.spline_coeffs.data)?;
        let base = Matrix::from_vec(lr.out_dim, lr.in_dim, lr.base_weights.data)?;
        let mut layer = KanLayer::zeros(lr.in_dim, lr.out_dim, record.variant, record.grid, record.use_base)?;
        layer.set_parameters(coeffs, base)?;
        layers.push(layer);
    }
    let net = KanNetwork::from_layers(layers)?;
    if net.dims() != record.dims {
        return Err(Error::shape(
            "network_from_json",
            format!("{:?}", record.dims),
            format!("{:?}", net.dims()),
        ));
    }
    Ok(net)
}

pub fn save_network(net: &KanNetwork, path: &Path) -> Result<()> {
    fs::write(path, network_to_json(net)?).map_err(|e| Error::io(path, e))
}

pub fn load_network(path: &Path) -> Result<KanNetwork> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    network_from_json(&text)
}

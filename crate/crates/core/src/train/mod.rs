//! Losses, the mini-batch Adam loop, and the two end-to-end paths: a single
//! multi-class KAN and an ECOC ensemble of binary KANs.

mod ensemble_io;
mod loss;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use ensemble_io::{load_ensemble, save_ensemble, EnsembleManifest};
pub use loss::{bce_loss, cross_entropy_loss, softmax};

use crate::data::Dataset;
use crate::ecoc::{binary_targets_for_bit, decode_codeword, Codeword, CodingMatrix};
use crate::error::{Error, Result};
use crate::grad_engine::{adam_step, AdamConfig, AdamState, Matrix};
use crate::layers::{KanNetwork, NetworkSpec};
use crate::rng::{derive_seed, seeded};

/// Stream index reserved for mini-batch shuffling.
const SHUFFLE_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub shuffle: bool,
    /// Train ECOC bit classifiers on the rayon pool.
    pub parallel: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            batch_size: 64,
            seed: 0,
            shuffle: true,
            parallel: false,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Config("batch size must be >= 1".into()));
        }
        self.adam().validate()
    }

    fn with_seed(&self, seed: u64) -> TrainConfig {
        TrainConfig { seed, ..self.clone() }
    }
}

/// First 16 hex digits of the SHA-256 of the value's JSON form.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    let bytes = serde_json::to_vec(value)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().take(8).map(|b| format!("{b:02x}")).collect())
}

/// Per-bit classifier seed; independent of training order.
pub fn bit_seed(seed: u64, bit: usize) -> u64 {
    derive_seed(seed, bit as u64)
}

struct Optimizer {
    states: Vec<(AdamState, AdamState)>,
}

impl Optimizer {
    fn new(net: &KanNetwork) -> Self {
        Optimizer {
            states: net
                .layers()
                .iter()
                .enumerate()
                .map(|(i, l)| {
                    (
                        AdamState::for_params(format!("layer{i}.spline_coeffs"), l.spline_coeffs()),
                        AdamState::for_params(format!("layer{i}.base_weights"), l.base_weights()),
                    )
                })
                .collect(),
        }
    }
}

/// Generic mini-batch loop. `loss` maps (logits, batch row indices) to the
/// batch loss and its logit gradient. Returns the sample-weighted mean loss
/// of every epoch.
fn fit<L>(net: &mut KanNetwork, features: &Matrix, cfg: &TrainConfig, mut loss: L) -> Result<Vec<f64>>
where
    L: FnMut(&Matrix, &[usize]) -> Result<(f64, Matrix)>,
{
    cfg.validate()?;
    if features.cols() != net.in_dim() {
        return Err(Error::shape(
            "train",
            format!("network input dim {}", net.in_dim()),
            format!("data dim {}", features.cols()),
        ));
    }
    let n = features.rows();
    if n == 0 {
        return Err(Error::Data("training set is empty".into()));
    }
    let adam = cfg.adam();
    let mut opt = Optimizer::new(net);
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = seeded(derive_seed(cfg.seed, SHUFFLE_STREAM));
    let mut history = Vec::with_capacity(cfg.epochs);
    // the first layer always sees the same rows
    let table = net.layers()[0].basis_table(features)?;

    for epoch in 0..cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        let mut epoch_loss = 0.0;
        for (batch_no, idx) in order.chunks(cfg.batch_size).enumerate() {
            let x = features.select_rows(idx);
            let (logits, cache) = net
                .forward_train_rows(&x, &table, idx)
                .map_err(|e| at_step(e, epoch, batch_no))?;
            let (l, grad) = loss(&logits, idx).map_err(|e| at_step(e, epoch, batch_no))?;
            if !l.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite loss at epoch {epoch}, batch {batch_no}"
                )));
            }
            let grads = net.param_gradients(&cache, &grad)?;
            for ((layer, g), (sc, sb)) in net.layers_mut().iter_mut().zip(grads).zip(&mut opt.states) {
                adam_step(layer.spline_coeffs_mut(), &g.spline_coeffs, sc, &adam)
                    .map_err(|e| at_step(e, epoch, batch_no))?;
                if layer.use_base() {
                    adam_step(layer.base_weights_mut(), &g.base_weights, sb, &adam)
                        .map_err(|e| at_step(e, epoch, batch_no))?;
                }
            }
            epoch_loss += l * idx.len() as f64;
        }
        history.push(epoch_loss / n as f64);
    }
    Ok(history)
}

fn at_step(e: Error, epoch: usize, batch: usize) -> Error {
    match e {
        Error::Numeric(m) => Error::Numeric(format!("epoch {epoch}, batch {batch}: {m}")),
        other => other,
    }
}

/// Trains a multi-class network with softmax cross-entropy.
pub fn train_vanilla(mut net: KanNetwork, data: &Dataset, cfg: &TrainConfig) -> Result<(KanNetwork, Vec<f64>)> {
    if net.output_dim() != data.num_classes {
        return Err(Error::shape(
            "train_vanilla",
            format!("network output dim {}", net.output_dim()),
            format!("{} classes", data.num_classes),
        ));
    }
    let labels = &data.labels;
    let history = fit(&mut net, &data.features, cfg, |logits, idx| {
        let y: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
        cross_entropy_loss(logits, &y)
    })?;
    Ok((net, history))
}

/// Trains one binary network on 0/1 targets with BCE.
pub fn train_binary(
    mut net: KanNetwork,
    features: &Matrix,
    targets: &[f64],
    cfg: &TrainConfig,
) -> Result<(KanNetwork, Vec<f64>)> {
    if net.output_dim() != 1 {
        return Err(Error::shape(
            "train_binary",
            format!("output dim {}", net.output_dim()),
            "1",
        ));
    }
    if targets.len() != features.rows() {
        return Err(Error::shape("train_binary", features.rows(), targets.len()));
    }
    let history = fit(&mut net, features, cfg, |logits, idx| {
        let t: Vec<f64> = idx.iter().map(|&i| targets[i]).collect();
        let (l, g) = bce_loss(logits.as_slice(), &t)?;
        Ok((l, Matrix::from_vec(g.len(), 1, g)?))
    })?;
    Ok((net, history))
}

/// The `b` bit classifiers plus the code they were trained against.
#[derive(Debug, Clone, PartialEq)]
pub struct EcocEnsemble {
    coding_matrix: CodingMatrix,
    classifiers: Vec<KanNetwork>,
}

impl EcocEnsemble {
    pub fn new(coding_matrix: CodingMatrix, classifiers: Vec<KanNetwork>) -> Result<Self> {
        if classifiers.len() != coding_matrix.code_length() {
            return Err(Error::shape(
                "EcocEnsemble::new",
                format!("b={}", coding_matrix.code_length()),
                format!("{} classifiers", classifiers.len()),
            ));
        }
        let in_dim = classifiers[0].in_dim();
        for (j, c) in classifiers.iter().enumerate() {
            if c.in_dim() != in_dim || c.output_dim() != 1 {
                return Err(Error::shape(
                    "EcocEnsemble::new",
                    format!("{in_dim} -> 1"),
                    format!("classifier {j}: {} -> {}", c.in_dim(), c.output_dim()),
                ));
            }
        }
        Ok(EcocEnsemble {
            coding_matrix,
            classifiers,
        })
    }

    pub fn coding_matrix(&self) -> &CodingMatrix {
        &self.coding_matrix
    }

    pub fn classifiers(&self) -> &[KanNetwork] {
        &self.classifiers
    }

    pub fn in_dim(&self) -> usize {
        self.classifiers[0].in_dim()
    }
}

/// Trains classifier `j` on `binary_targets_for_bit(labels, m, j)` for every
/// bit. Classifier `j` uses seed `bit_seed(cfg.seed, j)` for initialization
/// and shuffling, so serial and parallel runs agree exactly.
pub fn train_ecoc(
    data: &Dataset,
    cfg: &TrainConfig,
    m: &CodingMatrix,
    template: &NetworkSpec,
) -> Result<(EcocEnsemble, Vec<Vec<f64>>)> {
    cfg.validate()?;
    if m.num_classes() != data.num_classes {
        return Err(Error::shape(
            "train_ecoc",
            format!("coding matrix k={}", m.num_classes()),
            format!("{} classes in data", data.num_classes),
        ));
    }
    let train_bit = |j: usize| -> Result<(KanNetwork, Vec<f64>)> {
        let seed = bit_seed(cfg.seed, j);
        let targets = binary_targets_for_bit(&data.labels, m, j)?;
        let net = template.build(data.dim(), 1, seed)?;
        train_binary(net, &data.features, &targets, &cfg.with_seed(seed)).map_err(|e| tag_bit(e, j))
    };
    let results: Vec<Result<(KanNetwork, Vec<f64>)>> = if cfg.parallel {
        (0..m.code_length()).into_par_iter().map(train_bit).collect()
    } else {
        (0..m.code_length()).map(train_bit).collect()
    };
    let mut classifiers = Vec::with_capacity(results.len());
    let mut histories = Vec::with_capacity(results.len());
    for r in results {
        let (net, h) = r?;
        classifiers.push(net);
        histories.push(h);
    }
    Ok((EcocEnsemble::new(m.clone(), classifiers)?, histories))
}

fn tag_bit(e: Error, j: usize) -> Error {
    match e {
        Error::Numeric(m) => Error::Numeric(format!("bit {j}: {m}")),
        Error::Data(m) => Error::Data(format!("bit {j}: {m}")),
        other => other,
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Argmax of the softmax of each row; ties go to the smallest index.
pub fn predict_vanilla(net: &KanNetwork, inputs: &Matrix) -> Result<Vec<usize>> {
    let logits = net.forward(inputs)?;
    (0..logits.rows())
        .map(|r| Ok(argmax(&softmax(logits.row(r))?)))
        .collect()
}

/// Hard codewords: bit `j` is +1 when classifier `j`'s logit is >= 0
/// (sigmoid >= 0.5), else -1.
pub fn predict_codewords(ensemble: &EcocEnsemble, inputs: &Matrix) -> Result<Vec<Codeword>> {
    if inputs.cols() != ensemble.in_dim() {
        return Err(Error::shape(
            "predict_ecoc",
            format!("ensemble input dim {}", ensemble.in_dim()),
            format!("inputs {}", inputs.shape_str()),
        ));
    }
    let logits: Vec<Matrix> = ensemble
        .classifiers
        .iter()
        .map(|c| c.forward(inputs))
        .collect::<Result<_>>()?;
    (0..inputs.rows())
        .map(|r| Codeword::new(logits.iter().map(|l| if l.get(r, 0) >= 0.0 { 1 } else { -1 }).collect()))
        .collect()
}

pub fn predict_ecoc(ensemble: &EcocEnsemble, inputs: &Matrix) -> Result<Vec<usize>> {
    predict_codewords(ensemble, inputs)?
        .iter()
        .map(|c| decode_codeword(c, &ensemble.coding_matrix))
        .collect()
}

//! Datasets: CSV ingestion, min-max scaling into the spline domain,
//! stratified splits and a synthetic Gaussian-blob generator.

use std::path::Path;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grad_engine::Matrix;
use crate::rng::seeded;

/// Feature matrix plus integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub feature_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::shape(
                "Dataset::new",
                format!("{} feature rows", features.rows()),
                format!("{} labels", labels.len()),
            ));
        }
        if let Some(&y) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::Data(format!("label {y} out of range for {num_classes} classes")));
        }
        Ok(Dataset {
            features,
            labels,
            num_classes,
            feature_names: None,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Errors unless every class in `0..k` occurs at least once.
    pub fn require_all_classes(&self) -> Result<()> {
        if let Some(c) = self.class_counts().iter().position(|&n| n == 0) {
            return Err(Error::Data(format!("class {c} has no samples")));
        }
        Ok(())
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
            feature_names: self.feature_names.clone(),
        }
    }
}

fn parse_err(path: &Path, row: usize, column: &str, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        row,
        column: column.to_string(),
        msg: msg.into(),
    }
}

/// Reads a headered CSV; `k` is inferred as `max label + 1`.
pub fn load_csv_dataset(path: &Path, label_column: &str) -> Result<Dataset> {
    load_csv_dataset_with_classes(path, label_column, None)
}

/// Like [`load_csv_dataset`] with an optional explicit class count.
pub fn load_csv_dataset_with_classes(path: &Path, label_column: &str, num_classes: Option<usize>) -> Result<Dataset> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.iter().all(|b| b.is_ascii_whitespace()) {
        return Err(Error::Data(format!("{} is empty", path.display())));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(bytes.as_slice());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| parse_err(path, 1, "-", e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| parse_err(path, 1, label_column, "label column not found in header"))?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (r, record) in reader.records().enumerate() {
        // header is row 1
        let row_no = r + 2;
        let record = record.map_err(|e| parse_err(path, row_no, "-", e.to_string()))?;
        if record.len() != headers.len() {
            return Err(parse_err(
                path,
                row_no,
                "-",
                format!("ragged row: {} fields, header has {}", record.len(), headers.len()),
            ));
        }
        for (c, cell) in record.iter().enumerate() {
            let cell = cell.trim();
            if c == label_idx {
                let y: usize = cell.parse().map_err(|_| {
                    parse_err(
                        path,
                        row_no,
                        &headers[c],
                        format!("label '{cell}' is not a non-negative integer"),
                    )
                })?;
                labels.push(y);
            } else {
                let v: f64 = cell
                    .parse()
                    .map_err(|_| parse_err(path, row_no, &headers[c], format!("'{cell}' is not numeric")))?;
                if !v.is_finite() {
                    return Err(parse_err(path, row_no, &headers[c], format!("'{cell}' is not finite")));
                }
                data.push(v);
            }
        }
    }
    if labels.is_empty() {
        return Err(Error::Data(format!("{} has a header but no rows", path.display())));
    }
    let inferred = labels.iter().max().map_or(0, |m| m + 1);
    let k = match num_classes {
        Some(k) if k < inferred => {
            return Err(Error::Data(format!(
                "label {} exceeds the declared {k} classes",
                inferred - 1
            )))
        }
        Some(k) => k,
        None => inferred,
    };
    let features = Matrix::from_vec(labels.len(), feature_names.len(), data)?;
    let mut ds = Dataset::new(features, labels, k)?;
    ds.feature_names = Some(feature_names);
    Ok(ds)
}

/// Writes features and labels in the format [`load_csv_dataset`] reads.
pub fn write_csv_dataset(ds: &Dataset, path: &Path, label_column: &str) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    let names: Vec<String> = match &ds.feature_names {
        Some(n) if n.len() == ds.dim() => n.clone(),
        _ => (0..ds.dim()).map(|i| format!("f{i}")).collect(),
    };
    let mut header = names;
    header.push(label_column.to_string());
    let to_io = |e: csv::Error| Error::io(path, e.into());
    w.write_record(&header).map_err(to_io)?;
    for r in 0..ds.len() {
        let mut rec: Vec<String> = ds.features.row(r).iter().map(|v| v.to_string()).collect();
        rec.push(ds.labels[r].to_string());
        w.write_record(&rec).map_err(to_io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Per-feature min/max recorded from training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl Normalizer {
    pub fn fit(features: &Matrix) -> Result<Self> {
        if features.rows() == 0 {
            return Err(Error::Data("cannot fit normalizer on zero rows".into()));
        }
        let mut mins = features.row(0).to_vec();
        let mut maxs = mins.clone();
        for r in 1..features.rows() {
            for (c, &v) in features.row(r).iter().enumerate() {
                mins[c] = mins[c].min(v);
                maxs[c] = maxs[c].max(v);
            }
        }
        Ok(Normalizer { mins, maxs })
    }

    /// Maps `[min, max]` affinely onto `[-1, 1]`; constant features go to 0.
    /// Values outside the fitted range are left outside `[-1, 1]`.
    pub fn transform(&self, features: &Matrix) -> Result<Matrix> {
        if features.cols() != self.mins.len() {
            return Err(Error::shape(
                "Normalizer::transform",
                format!("{} fitted features", self.mins.len()),
                features.shape_str(),
            ));
        }
        let mut out = features.clone();
        for r in 0..out.rows() {
            for (c, v) in out.row_mut(r).iter_mut().enumerate() {
                let (lo, hi) = (self.mins[c], self.maxs[c]);
                *v = if hi > lo {
                    2.0 * (*v - lo) / (hi - lo) - 1.0
                } else {
                    0.0
                };
            }
        }
        Ok(out)
    }

    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        let mut out = ds.clone();
        out.features = self.transform(&ds.features)?;
        Ok(out)
    }
}

/// Min-max scales every feature into `[-1, 1]` and returns the statistics.
pub fn normalize_features(ds: &Dataset) -> Result<(Dataset, Normalizer)> {
    let norm = Normalizer::fit(&ds.features)?;
    Ok((norm.apply(ds)?, norm))
}

/// Per-class seeded split. Each class contributes `round(n_c * test_fraction)`
/// samples to the test side, kept within `1..n_c`. Both sides keep the input
/// row order.
pub fn stratified_split(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!(
            "test fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ds.num_classes];
    for (i, &y) in ds.labels.iter().enumerate() {
        by_class[y].push(i);
    }
    let mut rng = seeded(seed);
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for (c, idx) in by_class.iter_mut().enumerate() {
        if idx.is_empty() {
            continue;
        }
        if idx.len() < 2 {
            return Err(Error::Data(format!(
                "class {c} has {} sample(s), need at least 2",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        let n_test = ((idx.len() as f64 * test_fraction).round() as usize).clamp(1, idx.len() - 1);
        test_idx.extend_from_slice(&idx[..n_test]);
        train_idx.extend_from_slice(&idx[n_test..]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok((ds.subset(&train_idx), ds.subset(&test_idx)))
}

fn gaussian_vec(dim: usize, rng: &mut crate::rng::Rng) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

fn normalize(v: &mut [f64]) -> bool {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n < 1e-12 {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= n);
    true
}

/// `count` orthonormal random vectors via Gram–Schmidt.
fn orthonormal_frame(dim: usize, count: usize, rng: &mut crate::rng::Rng) -> Vec<Vec<f64>> {
    let mut frame: Vec<Vec<f64>> = Vec::with_capacity(count);
    while frame.len() < count {
        let mut v = gaussian_vec(dim, rng);
        for u in &frame {
            let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= dot * b);
        }
        if normalize(&mut v) {
            frame.push(v);
        }
    }
    frame
}

/// Class-center directions: a random orthonormal set when `k <= dim`,
/// otherwise `k` evenly spaced points on a circle in a random plane.
fn class_directions(k: usize, dim: usize, rng: &mut crate::rng::Rng) -> Result<Vec<Vec<f64>>> {
    if k <= dim {
        return Ok(orthonormal_frame(dim, k, rng));
    }
    if dim == 1 {
        if k == 2 {
            return Ok(vec![vec![1.0], vec![-1.0]]);
        }
        return Err(Error::Config(format!(
            "cannot place {k} distinct unit directions in 1 dimension"
        )));
    }
    let plane = orthonormal_frame(dim, 2, rng);
    let phase: f64 = rand::Rng::random_range(rng, 0.0..std::f64::consts::TAU);
    Ok((0..k)
        .map(|c| {
            let a = phase + std::f64::consts::TAU * c as f64 / k as f64;
            (0..dim)
                .map(|d| a.cos() * plane[0][d] + a.sin() * plane[1][d])
                .collect()
        })
        .collect())
}

/// Isotropic unit-variance Gaussian blobs centered at `separation * u_c`.
/// Rows are grouped by class.
pub fn synth_blobs(k: usize, samples_per_class: usize, dim: usize, separation: f64, seed: u64) -> Result<Dataset> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 classes, got {k}")));
    }
    if dim == 0 || samples_per_class == 0 {
        return Err(Error::Config("dim and samples per class must be >= 1".into()));
    }
    if !(separation >= 0.0 && separation.is_finite()) {
        return Err(Error::Config(format!(
            "separation must be finite and >= 0, got {separation}"
        )));
    }
    let mut rng = seeded(seed);
    let dirs = class_directions(k, dim, &mut rng)?;
    let n = k * samples_per_class;
    let mut data = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for (c, dir) in dirs.iter().enumerate() {
        for _ in 0..samples_per_class {
            for &u in dir {
                let z: f64 = StandardNormal.sample(&mut rng);
                data.push(separation * u + z);
            }
            labels.push(c);
        }
    }
    Dataset::new(Matrix::from_vec(n, dim, data)?, labels, k)
}

/// Class centers that [`synth_blobs`] uses for a given seed.
pub fn synth_centers(k: usize, dim: usize, separation: f64, seed: u64) -> Result<Vec<Vec<f64>>> {
    let mut rng = seeded(seed);
    Ok(class_directions(k, dim, &mut rng)?
        .into_iter()
        .map(|d| d.into_iter().map(|x| x * separation).collect())
        .collect())
}

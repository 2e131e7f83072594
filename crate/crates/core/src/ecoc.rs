//! Error-correcting output codes: random ±1 coding matrices, label encoding
//! and minimum-Hamming-distance decoding.

use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded;

/// Whole-matrix resampling budget for [`generate_coding_matrix`].
pub const MAX_GENERATION_ATTEMPTS: usize = 1000;

/// A length-`b` vector over `{-1, +1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Codeword(Vec<i8>);

impl Codeword {
    pub fn new(bits: Vec<i8>) -> Result<Self> {
        if let Some(pos) = bits.iter().position(|&b| b != 1 && b != -1) {
            return Err(Error::Domain(format!(
                "codeword entry {pos} is {}, expected -1 or +1",
                bits[pos]
            )));
        }
        Ok(Codeword(bits))
    }

    pub fn bits(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Copy with position `j` negated.
    pub fn flipped(&self, j: usize) -> Codeword {
        let mut bits = self.0.clone();
        bits[j] = -bits[j];
        Codeword(bits)
    }
}

/// `k x b` code matrix; row `i` is the codeword of class `i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodingMatrix {
    k: usize,
    b: usize,
    seed: u64,
    rows: Vec<Vec<i8>>,
}

/// Codeword length used when none is given.
pub fn default_code_length(k: usize) -> usize {
    2 * k
}

fn min_bits(k: usize) -> usize {
    (usize::BITS - (k - 1).leading_zeros()) as usize
}

/// Draws i.i.d. ±1 entries conditioned on pairwise-distinct rows and no
/// constant column. The column condition factorizes, so a constant column is
/// redrawn on its own; a row collision redraws the whole matrix. Either way
/// the result is uniform over valid matrices.
pub fn generate_coding_matrix(k: usize, b: usize, seed: u64) -> Result<CodingMatrix> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 classes, got {k}")));
    }
    if b < min_bits(k) {
        return Err(Error::Config(format!(
            "code length {b} cannot separate {k} classes (need >= {})",
            min_bits(k)
        )));
    }
    let mut rng = seeded(seed);
    let draw = |rng: &mut crate::rng::Rng| if rng.random::<bool>() { 1i8 } else { -1 };
    for _ in 0..MAX_GENERATION_ATTEMPTS {
        let mut rows = vec![vec![0i8; b]; k];
        for j in 0..b {
            // k >= 2, so each redraw is non-constant with probability >= 1/2
            loop {
                for r in rows.iter_mut() {
                    r[j] = draw(&mut rng);
                }
                if rows.iter().any(|r| r[j] != rows[0][j]) {
                    break;
                }
            }
        }
        let m = CodingMatrix { k, b, seed, rows };
        if m.check_invariants().is_ok() {
            return Ok(m);
        }
    }
    Err(Error::Generation {
        k,
        b,
        attempts: MAX_GENERATION_ATTEMPTS,
    })
}

impl CodingMatrix {
    /// Wraps explicit rows after checking every invariant.
    pub fn from_rows(rows: Vec<Vec<i8>>, seed: u64) -> Result<Self> {
        let k = rows.len();
        let b = rows.first().map_or(0, Vec::len);
        let m = CodingMatrix { k, b, seed, rows };
        m.check_invariants()?;
        Ok(m)
    }

    fn check_invariants(&self) -> Result<()> {
        if self.k < 2 || self.rows.len() != self.k {
            return Err(Error::Domain(format!(
                "coding matrix needs k >= 2 rows matching k, got k={} with {} rows",
                self.k,
                self.rows.len()
            )));
        }
        if self.b == 0 {
            return Err(Error::Domain("coding matrix has zero columns".into()));
        }
        for (i, r) in self.rows.iter().enumerate() {
            if r.len() != self.b {
                return Err(Error::Domain(format!(
                    "row {i} has {} entries, expected {}",
                    r.len(),
                    self.b
                )));
            }
            if let Some(j) = r.iter().position(|&v| v != 1 && v != -1) {
                return Err(Error::Domain(format!("entry ({i}, {j}) is {}, expected ±1", r[j])));
            }
        }
        for i in 0..self.k {
            for j in i + 1..self.k {
                if self.rows[i] == self.rows[j] {
                    return Err(Error::Domain(format!("rows {i} and {j} are identical")));
                }
            }
        }
        for j in 0..self.b {
            let first = self.rows[0][j];
            if self.rows.iter().all(|r| r[j] == first) {
                return Err(Error::Domain(format!("column {j} is constant")));
            }
        }
        Ok(())
    }

    pub fn num_classes(&self) -> usize {
        self.k
    }

    pub fn code_length(&self) -> usize {
        self.b
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn entry(&self, class: usize, bit: usize) -> i8 {
        self.rows[class][bit]
    }

    pub fn row(&self, class: usize) -> &[i8] {
        &self.rows[class]
    }

    /// Copy with column `j` negated. Negation preserves every invariant.
    pub fn with_flipped_column(&self, j: usize) -> CodingMatrix {
        let mut m = self.clone();
        for r in &mut m.rows {
            r[j] = -r[j];
        }
        m
    }

    /// Smallest pairwise Hamming distance between rows.
    pub fn min_distance(&self) -> usize {
        let mut best = usize::MAX;
        for i in 0..self.k {
            for j in i + 1..self.k {
                best = best.min(row_distance(&self.rows[i], &self.rows[j]));
            }
        }
        best
    }

    /// Mean Hamming distance over all unordered row pairs.
    pub fn mean_pairwise_distance(&self) -> f64 {
        let mut total = 0usize;
        let mut pairs = 0usize;
        for i in 0..self.k {
            for j in i + 1..self.k {
                total += row_distance(&self.rows[i], &self.rows[j]);
                pairs += 1;
            }
        }
        total as f64 / pairs as f64
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses and validates a coding-matrix file body.
    pub fn from_json(text: &str) -> Result<Self> {
        let m: CodingMatrix = serde_json::from_str(text)?;
        if m.rows.first().map_or(0, Vec::len) != m.b {
            return Err(Error::Domain(format!("declared b={} does not match rows", m.b)));
        }
        m.check_invariants()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        CodingMatrix::from_json(&text)
    }
}

fn row_distance(a: &[i8], b: &[i8]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

pub fn encode_label(class_index: usize, m: &CodingMatrix) -> Result<Codeword> {
    if class_index >= m.k {
        return Err(Error::Domain(format!(
            "class {class_index} out of range for {} classes",
            m.k
        )));
    }
    Ok(Codeword(m.rows[class_index].clone()))
}

pub fn hamming_distance(a: &Codeword, b: &Codeword) -> Result<usize> {
    if a.len() != b.len() {
        return Err(Error::shape("hamming_distance", a.len(), b.len()));
    }
    Ok(row_distance(&a.0, &b.0))
}

/// Nearest row by Hamming distance; ties go to the smallest class index.
pub fn decode_codeword(predicted: &Codeword, m: &CodingMatrix) -> Result<usize> {
    if predicted.len() != m.b {
        return Err(Error::shape(
            "decode_codeword",
            format!("codeword length {}", predicted.len()),
            format!("matrix b={}", m.b),
        ));
    }
    let mut best = (usize::MAX, 0);
    for (class, row) in m.rows.iter().enumerate() {
        let d = row_distance(row, &predicted.0);
        if d < best.0 {
            best = (d, class);
        }
    }
    Ok(best.1)
}

/// 0/1 targets for bit classifier `bit`: 1 where the label's code entry is +1.
pub fn binary_targets_for_bit(labels: &[usize], m: &CodingMatrix, bit: usize) -> Result<Vec<f64>> {
    if bit >= m.b {
        return Err(Error::Domain(format!("bit {bit} out of range for b={}", m.b)));
    }
    labels
        .iter()
        .map(|&y| {
            if y >= m.k {
                Err(Error::Domain(format!("label {y} out of range for {} classes", m.k)))
            } else {
                Ok((f64::from(m.rows[y][bit]) + 1.0) / 2.0)
            }
        })
        .collect()
}

//! Ensemble directory layout:
//!
//! ```text
//! <dir>/manifest.json        k, b, config hash, classifier file names
//! <dir>/coding_matrix.json
//! <dir>/bit_<j>.json         one model file per bit
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EcocEnsemble;
use crate::ecoc::CodingMatrix;
use crate::error::{Error, Result};
use crate::layers::{load_network, save_network};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CODING_MATRIX_FILE: &str = "coding_matrix.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleManifest {
    pub k: usize,
    pub b: usize,
    pub config_hash: String,
    pub coding_matrix: String,
    pub classifiers: Vec<String>,
}

fn bit_file(j: usize) -> String {
    format!("bit_{j}.json")
}

pub fn save_ensemble(ensemble: &EcocEnsemble, dir: &Path, config_hash: &str) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let m = ensemble.coding_matrix();
    m.save(&dir.join(CODING_MATRIX_FILE))?;
    let mut files = Vec::with_capacity(ensemble.classifiers().len());
    for (j, net) in ensemble.classifiers().iter().enumerate() {
        let name = bit_file(j);
        save_network(net, &dir.join(&name))?;
        files.push(name);
    }
    let manifest = EnsembleManifest {
        k: m.num_classes(),
        b: m.code_length(),
        config_hash: config_hash.to_string(),
        coding_matrix: CODING_MATRIX_FILE.into(),
        classifiers: files,
    };
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))
}

pub fn load_ensemble(dir: &Path) -> Result<(EcocEnsemble, EnsembleManifest)> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: EnsembleManifest = serde_json::from_str(&text)?;
    let m = CodingMatrix::load(&dir.join(&manifest.coding_matrix))?;
    if m.num_classes() != manifest.k || m.code_length() != manifest.b || manifest.classifiers.len() != manifest.b {
        return Err(Error::Data(format!(
            "manifest (k={}, b={}, {} classifiers) disagrees with coding matrix (k={}, b={})",
            manifest.k,
            manifest.b,
            manifest.classifiers.len(),
            m.num_classes(),
            m.code_length()
        )));
    }
    let classifiers = manifest
        .classifiers
        .iter()
        .map(|f| load_network(&dir.join(f)))
        .collect::<Result<Vec<_>>>()?;
    Ok((EcocEnsemble::new(m, classifiers)?, manifest))
}

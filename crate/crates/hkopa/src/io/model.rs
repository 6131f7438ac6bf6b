//! JSON model files: the fitted object with enough provenance to reproduce
//! it. Matrix entries are embedded as JSON number arrays; serialization uses
//! shortest-round-trip formatting, so save/load preserves every bit and the
//! model evaluates identically after a round trip.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{AmbientShape, Configuration};
use crate::error::Error;
use crate::matrix::DenseMatrix;
use crate::terms::{HKopaModel, KroneckerTerm};
use crate::Result;

pub const FORMAT_VERSION: u32 = 1;

/// How the model was produced; every field is optional documentation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Human-readable digest of the fitting options.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub options: Option<String>,
    /// Checksum of the input the model was fitted to.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source_checksum: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TermFile {
    lambda: f64,
    a_rows: usize,
    a_cols: usize,
    a: Vec<f64>,
    b: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    ambient_rows: usize,
    ambient_cols: usize,
    canonical: bool,
    terms: Vec<TermFile>,
    #[serde(default)]
    provenance: Provenance,
}

pub fn save_model(
    model: &HKopaModel,
    provenance: &Provenance,
    path: impl AsRef<Path>,
) -> Result<()> {
    let file = ModelFile {
        format_version: FORMAT_VERSION,
        ambient_rows: model.ambient().rows,
        ambient_cols: model.ambient().cols,
        canonical: model.is_canonical(),
        terms: model
            .terms()
            .iter()
            .map(|t| TermFile {
                lambda: t.lambda(),
                a_rows: t.config().a_rows(),
                a_cols: t.config().a_cols(),
                a: t.a().data().to_vec(),
                b: t.b().data().to_vec(),
            })
            .collect(),
        provenance: provenance.clone(),
    };
    let json = serde_json::to_string_pretty(&file)
        .map_err(|e| Error::Format(format!("model serialization failed: {e}")))?;
    fs::write(path, json)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<(HKopaModel, Provenance)> {
    let bytes = fs::read(path)?;
    let file: ModelFile = serde_json::from_slice(&bytes)
        .map_err(|e| Error::Format(format!("model parse failed: {e}")))?;
    if file.format_version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported model format version {}",
            file.format_version
        )));
    }
    let ambient = AmbientShape::new(file.ambient_rows, file.ambient_cols)?;
    let mut terms = Vec::with_capacity(file.terms.len());
    for t in file.terms {
        let config = Configuration::new(t.a_rows, t.a_cols, ambient)?;
        let a = DenseMatrix::new(t.a_rows, t.a_cols, t.a)?;
        let b = DenseMatrix::new(config.b_rows(), config.b_cols(), t.b)?;
        terms.push(KroneckerTerm::from_parts(t.lambda, a, b, config)?);
    }
    let mut model = HKopaModel::new(ambient, terms)?;
    model.set_canonical(file.canonical);
    Ok((model, file.provenance))
}

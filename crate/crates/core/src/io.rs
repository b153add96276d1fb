//! JSON document formats for models and tomography record batches.
//!
//! Matrices are written row-major as nested lists of `[re, im]` pairs.
//! Floats use the shortest round-tripping decimal form, so reading a file
//! back reproduces every entry bit for bit.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::model::InterferometerModel;
use crate::tomography::{Configuration, TomographyMode, TomographyRecord};

type MatrixDoc = Vec<Vec<[f64; 2]>>;

fn matrix_to_doc(a: &ComplexMatrix) -> MatrixDoc {
    a.row_iter().map(|row| row.iter().map(|z| [z.re, z.im]).collect()).collect()
}

fn matrix_from_doc(doc: &MatrixDoc, n: usize, what: &str) -> Result<ComplexMatrix> {
    if doc.len() != n || doc.iter().any(|row| row.len() != n) {
        return Err(Error::Format(format!("{what} is not {n}x{n}")));
    }
    Ok(ComplexMatrix::from_row_iterator(
        n,
        n,
        doc.iter().flatten().map(|&[re, im]| Complex64::new(re, im)),
    ))
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    #[serde(rename = "N")]
    modes: usize,
    #[serde(rename = "K")]
    depth: usize,
    layers: Vec<MatrixDoc>,
}

pub fn model_to_json(model: &InterferometerModel) -> String {
    let doc = ModelDoc {
        modes: model.modes(),
        depth: model.depth(),
        layers: model.layers().iter().map(matrix_to_doc).collect(),
    };
    serde_json::to_string_pretty(&doc).expect("model documents always serialize")
}

pub fn model_from_json(text: &str) -> Result<InterferometerModel> {
    let doc: ModelDoc = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    if doc.layers.len() != doc.depth {
        return Err(Error::Format(format!("K = {} but {} layers given", doc.depth, doc.layers.len())));
    }
    let layers = doc
        .layers
        .iter()
        .enumerate()
        .map(|(k, layer)| matrix_from_doc(layer, doc.modes, &format!("layer {}", k + 1)))
        .collect::<Result<Vec<_>>>()?;
    InterferometerModel::new(layers)
}

#[derive(Serialize, Deserialize)]
struct RecordDoc {
    m: usize,
    /// 1-based.
    active_modes: Vec<usize>,
    conjugate: bool,
    mode: TomographyMode,
    /// Noise seed of the batch; record `index` used substream `index`.
    seed: u64,
    index: usize,
    measured: MatrixDoc,
}

#[derive(Serialize, Deserialize)]
struct RecordBatchDoc {
    #[serde(rename = "N")]
    modes: usize,
    #[serde(rename = "K")]
    depth: usize,
    records: Vec<RecordDoc>,
}

pub fn records_to_json(records: &[TomographyRecord], depth: usize, seed: u64) -> String {
    let modes = records.first().map_or(0, |r| r.measured.nrows());
    let doc = RecordBatchDoc {
        modes,
        depth,
        records: records
            .iter()
            .enumerate()
            .map(|(index, r)| RecordDoc {
                m: r.configuration.layer,
                active_modes: r.configuration.active_modes.iter().map(|&n| n + 1).collect(),
                conjugate: r.configuration.conjugate,
                mode: r.mode,
                seed,
                index,
                measured: matrix_to_doc(&r.measured),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("record documents always serialize")
}

/// Parse a record batch, rebuilding each configuration's phase pattern.
/// Returns the records and `K`.
pub fn records_from_json(text: &str) -> Result<(Vec<TomographyRecord>, usize)> {
    let doc: RecordBatchDoc = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    let records = doc
        .records
        .iter()
        .map(|r| {
            if r.active_modes.iter().any(|&n| n == 0 || n > doc.modes) {
                return Err(Error::Format(format!("record {}: active mode outside 1..={}", r.index, doc.modes)));
            }
            if r.m > doc.depth || r.m == 1 {
                return Err(Error::Format(format!("record {}: layer {} outside 2..={}", r.index, r.m, doc.depth)));
            }
            let active: Vec<usize> = r.active_modes.iter().map(|&n| n - 1).collect();
            let configuration = if r.m == 0 {
                Configuration::baseline(doc.modes, doc.depth)
            } else {
                Configuration::block(doc.modes, doc.depth, r.m, active, r.conjugate)
            };
            Ok(TomographyRecord {
                configuration,
                measured: matrix_from_doc(&r.measured, doc.modes, &format!("record {}", r.index))?,
                mode: r.mode,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((records, doc.depth))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

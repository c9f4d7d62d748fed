//! Model files: a JSON document holding `W` row-major together with its
//! metadata. Unknown fields are rejected.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{Preprocessing, Provenance, SimilarityModel, SquareMatrix};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDocument {
    format_version: u32,
    d: usize,
    #[serde(rename = "W")]
    w: Vec<f64>,
    provenance: Provenance,
    #[serde(rename = "trained_C")]
    trained_c: Option<f64>,
    preprocessing: Preprocessing,
}

pub fn model_to_json(model: &SimilarityModel) -> String {
    let doc = ModelDocument {
        format_version: FORMAT_VERSION,
        d: model.dim(),
        w: model.w().as_row_major().to_vec(),
        provenance: model.provenance(),
        trained_c: model.trained_c(),
        preprocessing: model.preprocessing(),
    };
    // serde_json writes the shortest decimal that round-trips each f64.
    let mut s = serde_json::to_string_pretty(&doc).expect("model document serializes");
    s.push('\n');
    s
}

pub fn model_from_json(text: &str) -> Result<SimilarityModel> {
    let doc: ModelDocument =
        serde_json::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))?;
    if doc.format_version != FORMAT_VERSION {
        return Err(Error::ModelFormat(format!(
            "unsupported format_version {} (expected {FORMAT_VERSION})",
            doc.format_version
        )));
    }
    if doc.d == 0 {
        return Err(Error::ModelFormat("d must be ≥ 1".into()));
    }
    if doc.w.len() != doc.d * doc.d {
        return Err(Error::ModelFormat(format!(
            "W has {} entries, expected d² = {}",
            doc.w.len(),
            doc.d * doc.d
        )));
    }
    let w = SquareMatrix::from_row_major(doc.d, doc.w)?;
    SimilarityModel::new(w, doc.provenance, doc.trained_c, doc.preprocessing)
        .map_err(|e| Error::ModelFormat(e.to_string()))
}

pub fn save_model(model: &SimilarityModel, path: &Path) -> Result<()> {
    fs::write(path, model_to_json(model)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_model(path: &Path) -> Result<SimilarityModel> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    model_from_json(&text)
}

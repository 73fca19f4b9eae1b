//! Versioned JSON envelopes for fitted models. Floats are written in
//! shortest round-trip form, so reloaded models predict bit-identically.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::corpus::store::write_atomic;
use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile<T> {
    pub kind: String,
    pub version: u32,
    pub model: T,
}

pub fn save_model<T: Serialize>(path: &Path, kind: &str, model: &T) -> Result<()> {
    let doc = ModelFile {
        kind: kind.to_string(),
        version: MODEL_FORMAT_VERSION,
        model,
    };
    let bytes = serde_json::to_vec_pretty(&doc).map_err(Error::Json)?;
    write_atomic(path, &bytes)
}

pub fn load_model<T: DeserializeOwned>(path: &Path, kind: &str) -> Result<T> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let doc: ModelFile<T> = serde_json::from_slice(&bytes).map_err(|e| Error::Corrupt {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    if doc.kind != kind || doc.version != MODEL_FORMAT_VERSION {
        return Err(Error::Corrupt {
            path: path.to_path_buf(),
            reason: format!(
                "expected {kind} v{MODEL_FORMAT_VERSION}, found {} v{}",
                doc.kind, doc.version
            ),
        });
    }
    Ok(doc.model)
}

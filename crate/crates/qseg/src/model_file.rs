//! Versioned, checksummed JSON model files.
//!
//! ```json
//! {
//!   "checksum": "sha256:<hex of the compact model JSON>",
//!   "format": "qseg-model",
//!   "format_version": 1,
//!   "model": { ... }
//! }
//! ```
//!
//! Keys are written sorted, so the compact serialization of `model` is
//! canonical and the checksum can be recomputed from the parsed file.
//! Floats use shortest round-trip notation and are parsed exactly, which
//! makes `load(save(m))` bit-equal to `m`.

use std::path::Path;

use qseg_core::pipeline::{Classifier, PipelineError};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const FORMAT_NAME: &str = "qseg-model";
pub const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("{0}: cannot read: {1}")]
    Read(String, std::io::Error),
    #[error("{0}: cannot write: {1}")]
    Write(String, std::io::Error),
    #[error("{0}: not valid JSON: {1}")]
    Parse(String, serde_json::Error),
    #[error("{0}: not a {FORMAT_NAME} file")]
    NotAModel(String),
    #[error("{name}: format version {found} is not supported (expected {FORMAT_VERSION})")]
    Version { name: String, found: String },
    #[error("{0}: checksum mismatch, the file is corrupt")]
    Checksum(String),
    #[error("{0}: invalid model: {1}")]
    Invalid(String, serde_json::Error),
    #[error("{0}: {1}")]
    Inconsistent(String, PipelineError),
    #[error("model holds non-finite values and cannot be stored")]
    NonFinite,
}

/// `sha256:` followed by the lowercase hex digest of `bytes`.
pub fn sha256_tag(bytes: &[u8]) -> String {
    format!("sha256:{:x}", Sha256::digest(bytes))
}

fn payload_checksum(model: &Value) -> String {
    sha256_tag(model.to_string().as_bytes())
}

pub fn to_bytes(c: &Classifier) -> Result<Vec<u8>, ModelFileError> {
    let model = serde_json::to_value(c).map_err(|_| ModelFileError::NonFinite)?;
    // NaN and infinities serialize as null and would not load back.
    match serde_json::from_value::<Classifier>(model.clone()) {
        Ok(back) if back == *c => {}
        _ => return Err(ModelFileError::NonFinite),
    }
    let mut doc = Map::new();
    doc.insert("checksum".into(), Value::String(payload_checksum(&model)));
    doc.insert("format".into(), Value::String(FORMAT_NAME.into()));
    doc.insert("format_version".into(), Value::from(FORMAT_VERSION));
    doc.insert("model".into(), model);
    let mut out = serde_json::to_vec_pretty(&Value::Object(doc)).expect("in-memory JSON values serialize");
    out.push(b'\n');
    Ok(out)
}

/// Parses a model file; `name` only labels error messages.
pub fn from_bytes(bytes: &[u8], name: &str) -> Result<Classifier, ModelFileError> {
    let doc: Value = serde_json::from_slice(bytes).map_err(|e| ModelFileError::Parse(name.into(), e))?;
    let Value::Object(mut doc) = doc else {
        return Err(ModelFileError::NotAModel(name.into()));
    };
    if doc.get("format").and_then(Value::as_str) != Some(FORMAT_NAME) {
        return Err(ModelFileError::NotAModel(name.into()));
    }
    match doc.get("format_version") {
        Some(v) if v.as_u64() == Some(FORMAT_VERSION) => {}
        Some(v) => {
            return Err(ModelFileError::Version {
                name: name.into(),
                found: v.to_string(),
            })
        }
        None => return Err(ModelFileError::NotAModel(name.into())),
    }
    let model = doc
        .remove("model")
        .ok_or_else(|| ModelFileError::NotAModel(name.into()))?;
    if doc.get("checksum").and_then(Value::as_str) != Some(payload_checksum(&model).as_str()) {
        return Err(ModelFileError::Checksum(name.into()));
    }
    let c: Classifier = serde_json::from_value(model).map_err(|e| ModelFileError::Invalid(name.into(), e))?;
    c.validate().map_err(|e| ModelFileError::Inconsistent(name.into(), e))?;
    Ok(c)
}

pub fn load(path: &Path) -> Result<Classifier, ModelFileError> {
    let name = path.display().to_string();
    let bytes = std::fs::read(path).map_err(|e| ModelFileError::Read(name.clone(), e))?;
    from_bytes(&bytes, &name)
}

pub fn save(c: &Classifier, path: &Path) -> Result<(), ModelFileError> {
    std::fs::write(path, to_bytes(c)?).map_err(|e| ModelFileError::Write(path.display().to_string(), e))
}

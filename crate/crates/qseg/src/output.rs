//! Everything a command writes goes through [`Outputs`], which records a
//! checksum per file for the run manifest.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model_file::sha256_tag;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OutputFile {
    /// Relative to the output directory, with `/` separators.
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug)]
pub struct Outputs {
    dir: PathBuf,
    written: Vec<OutputFile>,
}

impl Outputs {
    pub fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[OutputFile] {
        &self.written
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.written.retain(|f| f.path != rel);
        self.written.push(OutputFile {
            path: rel.to_string(),
            bytes: bytes.len(),
            sha256: sha256_tag(bytes),
        });
        Ok(path)
    }

    /// Pretty JSON with a trailing newline. Non-finite floats become `null`.
    pub fn json<T: Serialize + ?Sized>(&mut self, rel: &str, value: &T) -> Result<PathBuf> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(rel, &bytes)
    }

    /// CSV with a header taken from the field names of `T`.
    pub fn csv<T: Serialize>(&mut self, rel: &str, rows: impl IntoIterator<Item = T>) -> Result<PathBuf> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in rows {
            w.serialize(row)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
        self.write(rel, &bytes)
    }
}

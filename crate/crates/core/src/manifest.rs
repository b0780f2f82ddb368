//! Provenance manifests written next to every output file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::error::Result;
use crate::io;

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
    /// Input role -> SHA-256 of its content.
    pub inputs: BTreeMap<String, String>,
    /// Output file name -> SHA-256 of its content.
    pub outputs: BTreeMap<String, String>,
    pub config: Value,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub details: BTreeMap<String, Value>,
}

impl Manifest {
    pub fn new(command: &str, seed: Option<u64>, config: impl Serialize) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME").to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            command: command.to_owned(),
            seed,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            config: serde_json::to_value(config).unwrap_or(Value::Null),
            details: BTreeMap::new(),
        }
    }

    pub fn input_hash(&mut self, role: &str, sha256: String) -> &mut Self {
        self.inputs.insert(role.to_owned(), sha256);
        self
    }

    pub fn input_file(&mut self, role: &str, path: impl AsRef<Path>) -> Result<&mut Self> {
        let h = io::sha256_file(path)?;
        Ok(self.input_hash(role, h))
    }

    pub fn output_file(&mut self, path: impl AsRef<Path>) -> Result<&mut Self> {
        let path = path.as_ref();
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string());
        self.outputs.insert(name, io::sha256_file(path)?);
        Ok(self)
    }

    pub fn detail(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        self.details.insert(key.to_owned(), serde_json::to_value(value).unwrap_or(Value::Null));
        self
    }

    /// Writes `<primary>.manifest.json` and returns its path.
    pub fn write_for(&self, primary: impl AsRef<Path>) -> Result<PathBuf> {
        let path = manifest_path(primary.as_ref());
        io::write_json(&path, self)?;
        Ok(path)
    }
}

pub fn manifest_path(primary: &Path) -> PathBuf {
    let mut s = primary.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

//! TOML pipeline configuration. Every tunable of every stage lives here;
//! command-line flags override individual values.
//!
//! ```toml
//! seed = 7
//! min_cluster_size = 20
//!
//! [align]
//! seed_len = 10
//! x_drop = 10
//!
//! [noise]
//! kind = "realistic"
//!
//! [paths]
//! ocr_corpus = "ocr/"
//! clean_corpus = "clean.jsonl"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::DecoderParams;
use crate::consensus::GroupingParams;
use crate::error::{Error, Result};
use crate::noise::{ExportFormat, NoiseKind};
use crate::reuse::AlignParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    pub workers: Option<usize>,
    pub min_cluster_size: usize,
    pub align: AlignParams,
    pub grouping: GroupingParams,
    pub noise: NoiseConfig,
    pub lm: LmConfig,
    pub decoder: DecoderParams,
    pub paths: PathsConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: None,
            workers: None,
            min_cluster_size: 20,
            align: AlignParams::default(),
            grouping: GroupingParams::default(),
            noise: NoiseConfig::default(),
            lm: LmConfig::default(),
            decoder: DecoderParams::default(),
            paths: PathsConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub kind: NoiseKind,
    /// Uniform noise rate; defaults to the model's average CER.
    pub rate: Option<f64>,
    /// Characters drawn by uniform noise; defaults to ASCII letters and digits.
    pub replacement_set: Option<String>,
    pub format: ExportFormat,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig { kind: NoiseKind::Realistic, rate: None, replacement_set: None, format: ExportFormat::Plain }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LmConfig {
    pub order: usize,
    pub k: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        LmConfig { order: 4, k: 0.1 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub corpus: Option<PathBuf>,
    pub ocr_corpus: Option<PathBuf>,
    pub clean_corpus: Option<PathBuf>,
    pub pairs: Option<PathBuf>,
    pub clusters: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub lm: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub hyp: Option<PathBuf>,
    #[serde(rename = "ref")]
    pub reference: Option<PathBuf>,
    pub tsv: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::validation(format!("config: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::validation(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        self.align.validate()?;
        self.grouping.validate()?;
        self.decoder.validate()?;
        if self.min_cluster_size < 2 {
            return Err(Error::validation("min_cluster_size must be >= 2"));
        }
        if self.lm.order < 2 {
            return Err(Error::validation("lm.order must be >= 2"));
        }
        if let Some(r) = self.noise.rate {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::validation("noise.rate must be in [0, 1]"));
            }
        }
        if self.workers == Some(0) {
            return Err(Error::validation("workers must be positive"));
        }
        Ok(())
    }

    pub fn replacement_set(&self) -> Vec<char> {
        match &self.noise.replacement_set {
            Some(s) => s.chars().collect(),
            None => crate::noise::default_replacement_set(),
        }
    }
}

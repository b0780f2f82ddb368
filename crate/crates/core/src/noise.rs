//! Uniform and realistic noise injection and parallel dataset export.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::confusion::ConfusionModel;
use crate::corpus::{corpus_tokens, Corpus};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Uniform,
    Realistic,
}

/// ASCII letters `a-z`, `A-Z` and digits `0-9`.
pub fn default_replacement_set() -> Vec<char> {
    ('a'..='z').chain('A'..='Z').chain('0'..='9').collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    /// Uniform replacement probability. When absent, the average CER of the
    /// supplied model is used.
    pub rate: Option<f64>,
    pub replacement_set: Vec<char>,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn uniform(rate: Option<f64>, seed: u64) -> Self {
        NoiseSpec { kind: NoiseKind::Uniform, rate, replacement_set: default_replacement_set(), seed }
    }

    pub fn realistic(seed: u64) -> Self {
        NoiseSpec { kind: NoiseKind::Realistic, rate: None, replacement_set: default_replacement_set(), seed }
    }
}

/// The RNG for record `index` of a run seeded with `seed`. Each record gets
/// its own ChaCha stream so output does not depend on processing order.
pub fn record_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Replaces each codepoint with probability `rate` by a uniform draw from
/// `replacement_set`. The draw may equal the original character.
pub fn apply_uniform<R: Rng + ?Sized>(word: &str, rate: f64, replacement_set: &[char], rng: &mut R) -> Result<String> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::validation(format!("noise rate must be in [0, 1], got {rate}")));
    }
    if replacement_set.is_empty() && rate > 0.0 {
        return Err(Error::validation("replacement set is empty"));
    }
    Ok(word.chars().map(|c| if rng.random_bool(rate) { replacement_set[rng.random_range(0..replacement_set.len())] } else { c }).collect())
}

/// Per-character samplers built once from a confusion model.
#[derive(Debug, Clone)]
pub struct RealisticSampler {
    rows: HashMap<char, (Vec<char>, WeightedIndex<u64>)>,
}

impl RealisticSampler {
    pub fn new(model: &ConfusionModel) -> Self {
        let rows = model
            .counts()
            .iter()
            .map(|(&clean, row)| {
                let targets: Vec<char> = row.keys().copied().collect();
                let dist = WeightedIndex::new(row.values().copied()).expect("rows hold positive counts");
                (clean, (targets, dist))
            })
            .collect();
        RealisticSampler { rows }
    }

    pub fn sample<R: Rng + ?Sized>(&self, c: char, rng: &mut R) -> char {
        match self.rows.get(&c) {
            Some((targets, dist)) => targets[dist.sample(rng)],
            None => c,
        }
    }

    pub fn apply<R: Rng + ?Sized>(&self, word: &str, rng: &mut R) -> String {
        word.chars().map(|c| self.sample(c, rng)).collect()
    }
}

/// Replaces each codepoint by a draw from its row of `model` (identity
/// included). Characters without a row are kept.
pub fn apply_realistic<R: Rng + ?Sized>(word: &str, model: &ConfusionModel, rng: &mut R) -> String {
    RealisticSampler::new(model).apply(word, rng)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParallelPair {
    pub noisy: String,
    pub clean: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParallelDataset {
    pub pairs: Vec<ParallelPair>,
}

impl ParallelDataset {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Noise rate actually used for a uniform run.
pub fn resolve_uniform_rate(spec: &NoiseSpec, model: Option<&ConfusionModel>) -> Result<f64> {
    match (spec.rate, model) {
        (Some(r), _) => Ok(r),
        (None, Some(m)) => Ok(m.avg_cer()),
        (None, None) => Err(Error::validation("uniform noise needs an explicit rate or a confusion model to take the rate from")),
    }
}

/// Noises every token of `clean_corpus`, one pair per token in corpus order.
pub fn synthesize(clean_corpus: &Corpus, spec: &NoiseSpec, model: Option<&ConfusionModel>) -> Result<ParallelDataset> {
    let tokens = corpus_tokens(clean_corpus);
    let noisy: Vec<String> = match spec.kind {
        NoiseKind::Uniform => {
            let rate = resolve_uniform_rate(spec, model)?;
            tokens
                .par_iter()
                .enumerate()
                .map(|(i, t)| apply_uniform(t, rate, &spec.replacement_set, &mut record_rng(spec.seed, i as u64)))
                .collect::<Result<_>>()?
        }
        NoiseKind::Realistic => {
            let model = model.ok_or_else(|| Error::validation("realistic noise requires a confusion model"))?;
            let sampler = RealisticSampler::new(model);
            tokens.par_iter().enumerate().map(|(i, t)| sampler.apply(t, &mut record_rng(spec.seed, i as u64))).collect()
        }
    };
    Ok(ParallelDataset { pairs: noisy.into_iter().zip(tokens).map(|(noisy, clean)| ParallelPair { noisy, clean }).collect() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExportFormat {
    /// One `noisy<TAB>clean` line per pair.
    Plain,
    /// Two line-parallel files, `<path>.src` (noisy) and `<path>.tgt`
    /// (clean), with codepoints separated by single spaces.
    CharSpaced,
}

fn spaced(s: &str) -> String {
    let mut out = String::with_capacity(s.len() * 2);
    for (i, c) in s.chars().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push(c);
    }
    out
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Writes the dataset and returns the files written.
pub fn export_dataset(dataset: &ParallelDataset, format: ExportFormat, path: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let path = path.as_ref();
    match format {
        ExportFormat::Plain => {
            write_lines(path, dataset.pairs.iter().map(|p| format!("{}\t{}", p.noisy, p.clean)))?;
            Ok(vec![path.to_path_buf()])
        }
        ExportFormat::CharSpaced => {
            let src = with_suffix(path, ".src");
            let tgt = with_suffix(path, ".tgt");
            write_lines(&src, dataset.pairs.iter().map(|p| spaced(&p.noisy)))?;
            write_lines(&tgt, dataset.pairs.iter().map(|p| spaced(&p.clean)))?;
            Ok(vec![src, tgt])
        }
    }
}

fn write_lines(path: &Path, lines: impl Iterator<Item = String>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for line in lines {
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

//! Estimate the character error distribution of an OCR system from repeated
//! passages in an OCR-read corpus, synthesize noisy/clean training pairs that
//! follow it, and correct or evaluate tokens against CER/WER.
//!
//! The pipeline is:
//!
//! 1. [`reuse::detect_pairs`] finds repeated spans with seed-and-extend
//!    alignment, [`reuse::cluster_spans`] groups them and
//!    [`reuse::filter_clusters`] keeps the well-populated clusters.
//! 2. [`confusion::estimate_confusion`] groups similar words per cluster,
//!    votes a consensus word ([`consensus::positional_consensus`]) and counts
//!    one-to-one replacements into a [`ConfusionModel`].
//! 3. [`noise::synthesize`] noises a clean corpus with uniform or realistic
//!    noise.
//! 4. [`channel`] corrects tokens with a noisy-channel decoder and
//!    [`metrics::evaluate`] scores the result.

pub mod channel;
pub mod config;
pub mod confusion;
pub mod consensus;
pub mod corpus;
pub mod error;
pub mod io;
pub mod manifest;
pub mod metrics;
pub mod noise;
pub mod reuse;

pub use channel::{correct_token, train_lm, CharLM, Correction, Decoder, DecoderParams};
pub use confusion::{average_cer, estimate_confusion, ConfusionModel};
pub use consensus::{char_substitutions, group_words, positional_consensus, GroupingParams, WordGroup};
pub use corpus::{load_corpus, tokenize, Corpus, Document, Token};
pub use error::{Error, Result};
pub use metrics::{edit_distance, evaluate, EvalReport};
pub use noise::{apply_realistic, apply_uniform, export_dataset, synthesize, ExportFormat, NoiseKind, NoiseSpec};
pub use reuse::{cluster_spans, detect_pairs, filter_clusters, AlignParams, ReuseCluster, Span, SpanPair};

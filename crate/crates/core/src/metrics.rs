//! Levenshtein distance and micro-averaged CER/WER.

use serde::{Deserialize, Serialize};

use crate::corpus::tokenize;
use crate::error::{Error, Result};

/// Unit-cost Levenshtein distance over arbitrary sequences.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut curr = vec![0usize; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        curr[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            curr[j + 1] = sub.min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// Levenshtein distance between two strings counted in codepoints.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    levenshtein(&a, &b)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub cer: f64,
    pub wer: f64,
    pub char_edits: u64,
    pub char_ref_total: u64,
    pub word_edits: u64,
    pub word_ref_total: u64,
    pub pair_count: u64,
}

impl EvalReport {
    fn from_counts(char_edits: u64, char_ref_total: u64, word_edits: u64, word_ref_total: u64, pair_count: u64) -> Self {
        let ratio = |n: u64, d: u64| if d == 0 { 0.0 } else { n as f64 / d as f64 };
        EvalReport {
            cer: ratio(char_edits, char_ref_total),
            wer: ratio(word_edits, word_ref_total),
            char_edits,
            char_ref_total,
            word_edits,
            word_ref_total,
            pair_count,
        }
    }

    /// Combines two reports as if their pairs had been evaluated together.
    pub fn merge(&self, other: &EvalReport) -> EvalReport {
        EvalReport::from_counts(
            self.char_edits + other.char_edits,
            self.char_ref_total + other.char_ref_total,
            self.word_edits + other.word_edits,
            self.word_ref_total + other.word_ref_total,
            self.pair_count + other.pair_count,
        )
    }

    pub fn to_table(&self) -> String {
        format!(
            "metric  rate      edits      ref_total\n\
             CER     {:<8.4}  {:<9}  {}\n\
             WER     {:<8.4}  {:<9}  {}\n\
             pairs   {}\n",
            self.cer, self.char_edits, self.char_ref_total, self.wer, self.word_edits, self.word_ref_total, self.pair_count
        )
    }
}

/// Micro-averaged character and word error rates of `hypotheses` against
/// `references`. Word distance is Levenshtein over whitespace tokens.
pub fn evaluate<H, R>(hypotheses: &[H], references: &[R]) -> Result<EvalReport>
where
    H: AsRef<str>,
    R: AsRef<str>,
{
    if hypotheses.len() != references.len() {
        return Err(Error::validation(format!("{} hypotheses but {} references", hypotheses.len(), references.len())));
    }
    let (mut ce, mut ct, mut we, mut wt) = (0u64, 0u64, 0u64, 0u64);
    for (h, r) in hypotheses.iter().zip(references) {
        let (h, r) = (h.as_ref(), r.as_ref());
        ce += edit_distance(h, r) as u64;
        ct += r.chars().count() as u64;
        let ht: Vec<String> = tokenize(h).into_iter().map(|t| t.text).collect();
        let rt: Vec<String> = tokenize(r).into_iter().map(|t| t.text).collect();
        we += levenshtein(&ht, &rt) as u64;
        wt += rt.len() as u64;
    }
    Ok(EvalReport::from_counts(ce, ct, we, wt, hypotheses.len() as u64))
}

//! Character confusion counts and their estimation from reuse clusters.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::consensus::{char_substitutions, group_words, GroupingParams};
use crate::error::Result;
use crate::io;
use crate::reuse::ReuseCluster;

/// Per-character replacement counts, `counts[clean][observed]`, identity
/// included. Counts rather than probabilities are kept so that models can be
/// merged by addition.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfusionModel {
    counts: BTreeMap<char, BTreeMap<char, u64>>,
    row_totals: BTreeMap<char, u64>,
    alphabet: BTreeSet<char>,
    total: u64,
    off_diagonal: u64,
}

impl ConfusionModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, clean: char, observed: char, n: u64) {
        if n == 0 {
            return;
        }
        *self.counts.entry(clean).or_default().entry(observed).or_default() += n;
        *self.row_totals.entry(clean).or_default() += n;
        self.alphabet.insert(clean);
        self.alphabet.insert(observed);
        self.total += n;
        if clean != observed {
            self.off_diagonal += n;
        }
    }

    pub fn merge(&mut self, other: &ConfusionModel) {
        for (&c, row) in &other.counts {
            for (&o, &n) in row {
                self.add(c, o, n);
            }
        }
    }

    pub fn from_counts(counts: &BTreeMap<char, BTreeMap<char, u64>>) -> Self {
        let mut m = Self::new();
        for (&c, row) in counts {
            for (&o, &n) in row {
                m.add(c, o, n);
            }
        }
        m
    }

    /// Every character maps to itself with probability one.
    pub fn identity(chars: impl IntoIterator<Item = char>) -> Self {
        let mut m = Self::new();
        for c in chars {
            m.add(c, c, 1);
        }
        m
    }

    /// The channel implied by uniform noise: each clean character is, with
    /// probability `rate`, replaced by a uniform draw from `replacement_set`
    /// (which may return the character itself). Probabilities are stored as
    /// integer counts out of `scale`.
    pub fn uniform(clean: impl IntoIterator<Item = char>, replacement_set: &[char], rate: f64, scale: u64) -> Self {
        let mut m = Self::new();
        let per_draw = if replacement_set.is_empty() { 0 } else { (rate * scale as f64 / replacement_set.len() as f64).round() as u64 };
        for c in clean {
            let keep = scale - per_draw * replacement_set.len() as u64;
            m.add(c, c, keep);
            for &r in replacement_set {
                m.add(c, r, per_draw);
            }
        }
        m
    }

    pub fn counts(&self) -> &BTreeMap<char, BTreeMap<char, u64>> {
        &self.counts
    }

    pub fn count(&self, clean: char, observed: char) -> u64 {
        self.counts.get(&clean).and_then(|r| r.get(&observed)).copied().unwrap_or(0)
    }

    pub fn row_total(&self, clean: char) -> u64 {
        self.row_totals.get(&clean).copied().unwrap_or(0)
    }

    pub fn row_totals(&self) -> &BTreeMap<char, u64> {
        &self.row_totals
    }

    /// All characters seen on either side.
    pub fn alphabet(&self) -> &BTreeSet<char> {
        &self.alphabet
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// Off-diagonal mass over total mass; 0 for an empty model.
    pub fn avg_cer(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.off_diagonal as f64 / self.total as f64
        }
    }

    /// P(observed | clean). Characters without a row map to themselves.
    pub fn prob(&self, clean: char, observed: char) -> f64 {
        match self.row_totals.get(&clean) {
            Some(&t) => self.count(clean, observed) as f64 / t as f64,
            None => f64::from(u8::from(clean == observed)),
        }
    }

    /// Normalized row of `clean`, or `None` if it was never observed.
    pub fn row(&self, clean: char) -> Option<Vec<(char, f64)>> {
        let total = *self.row_totals.get(&clean)? as f64;
        Some(self.counts[&clean].iter().map(|(&o, &n)| (o, n as f64 / total)).collect())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        io::write_json(path, self)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        io::read_json(path)
    }
}

/// The average character error rate of a model.
pub fn average_cer(model: &ConfusionModel) -> f64 {
    model.avg_cer()
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    alphabet: Vec<char>,
    counts: BTreeMap<char, BTreeMap<char, u64>>,
    avg_cer: f64,
}

impl Serialize for ConfusionModel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ModelFile { alphabet: self.alphabet.iter().copied().collect(), counts: self.counts.clone(), avg_cer: self.avg_cer() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ConfusionModel {
    /// `avg_cer` and the alphabet are recomputed from the counts.
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let file = ModelFile::deserialize(d)?;
        let mut m = ConfusionModel::from_counts(&file.counts);
        m.alphabet.extend(file.alphabet);
        Ok(m)
    }
}

/// Summary of an estimation run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EstimateStats {
    pub clusters: usize,
    pub word_groups: usize,
    pub aligned_chars: u64,
}

fn cluster_counts(cluster: &ReuseCluster, params: &GroupingParams) -> (ConfusionModel, usize) {
    let mut model = ConfusionModel::new();
    let groups = group_words(cluster, params);
    for g in &groups {
        for (word, n) in &g.variants {
            for (clean, observed) in char_substitutions(word, &g.representative) {
                model.add(clean, observed, *n);
            }
        }
    }
    (model, groups.len())
}

/// Accumulates replacement counts over all word groups of all clusters.
pub fn estimate_confusion(clusters: &[ReuseCluster], params: &GroupingParams) -> ConfusionModel {
    estimate_confusion_with_stats(clusters, params).0
}

pub fn estimate_confusion_with_stats(clusters: &[ReuseCluster], params: &GroupingParams) -> (ConfusionModel, EstimateStats) {
    let (model, groups) = clusters.par_iter().map(|c| cluster_counts(c, params)).reduce(
        || (ConfusionModel::new(), 0),
        |(mut a, ga), (b, gb)| {
            a.merge(&b);
            (a, ga + gb)
        },
    );
    let stats = EstimateStats { clusters: clusters.len(), word_groups: groups, aligned_chars: model.total() };
    (model, stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reuse::Span;

    fn cluster(texts: &[&str]) -> ReuseCluster {
        ReuseCluster {
            id: 0,
            spans: texts
                .iter()
                .enumerate()
                .map(|(i, t)| Span { doc_id: format!("d{i}"), start: 0, end: t.chars().count(), text: t.to_string() })
                .collect(),
        }
    }

    #[test]
    fn average_cer_from_counts() {
        let mut m = ConfusionModel::new();
        m.add('a', 'a', 90);
        m.add('a', 'b', 10);
        assert!((average_cer(&m) - 0.1).abs() < 1e-15);
        assert_eq!(average_cer(&ConfusionModel::identity("abc".chars())), 0.0);
        assert_eq!(average_cer(&ConfusionModel::new()), 0.0);
    }

    #[test]
    fn rows_normalize() {
        let mut m = ConfusionModel::new();
        m.add('k', 'k', 7);
        m.add('k', 't', 3);
        let row = m.row('k').unwrap();
        assert_eq!(row, vec![('k', 0.7), ('t', 0.3)]);
        assert_eq!(m.prob('x', 'x'), 1.0);
        assert_eq!(m.prob('x', 'y'), 0.0);
        assert!(m.row('x').is_none());
        assert_eq!(m.alphabet().iter().collect::<String>(), "kt");
    }

    #[test]
    fn json_round_trip_and_shape() {
        let mut m = ConfusionModel::new();
        m.add('k', 'k', 812);
        m.add('k', 't', 34);
        m.add('ä', 'a', 2);
        let text = serde_json::to_string(&m).unwrap();
        assert!(text.starts_with(r#"{"alphabet":["a","k","t","ä"],"counts":{"k":{"k":812,"t":34},"ä":{"a":2}},"avg_cer":"#));
        let back: ConfusionModel = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn merge_adds_counts() {
        let mut a = ConfusionModel::new();
        a.add('a', 'a', 2);
        let mut b = ConfusionModel::new();
        b.add('a', 'a', 3);
        b.add('a', 'o', 1);
        a.merge(&b);
        assert_eq!(a.count('a', 'a'), 5);
        assert_eq!(a.row_total('a'), 6);
    }

    #[test]
    fn uniform_channel_matches_rate() {
        let set: Vec<char> = "abcd".chars().collect();
        let m = ConfusionModel::uniform("ax".chars(), &set, 0.2, 1_000_000);
        assert!((m.prob('a', 'b') - 0.05).abs() < 1e-12);
        assert!((m.prob('a', 'a') - 0.85).abs() < 1e-12);
        assert!((m.prob('x', 'x') - 0.8).abs() < 1e-12);
    }

    #[test]
    fn identical_spans_are_diagonal() {
        let texts = ["sama teksti tässä"; 20];
        let (m, stats) = estimate_confusion_with_stats(&[cluster(&texts)], &GroupingParams::default());
        assert_eq!(m.avg_cer(), 0.0);
        assert!(m.counts().iter().all(|(c, row)| row.keys().all(|o| o == c)));
        assert_eq!(stats.word_groups, 3);
        assert_eq!(m.count('s', 's'), 4 * 20);
    }

    #[test]
    fn empty_cluster_list_gives_empty_model() {
        let (m, stats) = estimate_confusion_with_stats(&[], &GroupingParams::default());
        assert!(m.is_empty());
        assert_eq!(m.avg_cer(), 0.0);
        assert_eq!(stats, EstimateStats::default());
    }

    #[test]
    fn adding_a_cluster_never_decreases_counts() {
        let c1 = cluster(&["kirkon kylän"; 4]);
        let c2 = cluster(&["tirkon kylän", "kirkon kylän", "kirkon kylän", "kirkon kvlän"]);
        let p = GroupingParams::default();
        let one = estimate_confusion(std::slice::from_ref(&c1), &p);
        let two = estimate_confusion(&[c1, c2], &p);
        for (c, row) in one.counts() {
            for (o, n) in row {
                assert!(two.count(*c, *o) >= *n);
            }
        }
        assert_eq!(two.count('k', 't'), 1);
        assert_eq!(two.count('y', 'v'), 1);
    }
}

//! Word grouping inside reuse clusters, positional majority consensus, and
//! one-to-one character alignment of variants against the consensus.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::tokenize;
use crate::error::{Error, Result};
use crate::metrics::levenshtein;
use crate::reuse::ReuseCluster;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroupingParams {
    /// Words join a pivot when their edit distance is at most
    /// `ceil(dist_threshold * max(len))`.
    pub dist_threshold: f64,
    /// A group is kept only if its words occur in at least this fraction of
    /// the cluster's spans.
    pub support_fraction: f64,
}

impl Default for GroupingParams {
    fn default() -> Self {
        GroupingParams { dist_threshold: 0.25, support_fraction: 0.5 }
    }
}

impl GroupingParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.dist_threshold) {
            return Err(Error::validation("dist_threshold must be in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.support_fraction) {
            return Err(Error::validation("support_fraction must be in [0, 1]"));
        }
        Ok(())
    }

    /// Largest edit distance allowed between words of these lengths.
    pub fn max_distance(&self, len_a: usize, len_b: usize) -> usize {
        let bound = self.dist_threshold * len_a.max(len_b) as f64;
        // absorb representation error such as 0.3 * 10 = 3.0000000000000004
        (bound - 1e-9).ceil().max(0.0) as usize
    }
}

/// Variants of one word observed across a cluster, with their consensus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordGroup {
    pub representative: String,
    /// `(word, occurrences)`, most frequent first.
    pub variants: Vec<(String, u64)>,
    /// Number of distinct spans contributing at least one variant.
    pub support: usize,
}

struct WordType {
    text: String,
    chars: Vec<char>,
    count: u64,
    spans: BTreeSet<usize>,
}

/// Groups similar words of a cluster around frequent pivots.
///
/// Word types are visited by descending frequency (ties by text). Each type
/// not yet grouped becomes a pivot and absorbs every other ungrouped type
/// within the distance bound. Groups supported by fewer than
/// `support_fraction` of the spans are discarded.
pub fn group_words(cluster: &ReuseCluster, params: &GroupingParams) -> Vec<WordGroup> {
    let mut by_text: HashMap<String, WordType> = HashMap::new();
    for (si, span) in cluster.spans.iter().enumerate() {
        for tok in tokenize(&span.text) {
            let entry = by_text.entry(tok.text).or_insert_with_key(|t| WordType {
                text: t.clone(),
                chars: t.chars().collect(),
                count: 0,
                spans: BTreeSet::new(),
            });
            entry.count += 1;
            entry.spans.insert(si);
        }
    }
    let mut types: Vec<WordType> = by_text.into_values().collect();
    types.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.text.cmp(&b.text)));

    let needed = params.support_fraction * cluster.spans.len() as f64;
    let mut grouped = vec![false; types.len()];
    let mut groups = Vec::new();
    for p in 0..types.len() {
        if grouped[p] {
            continue;
        }
        grouped[p] = true;
        let mut members = vec![p];
        for w in p + 1..types.len() {
            if grouped[w] {
                continue;
            }
            let (pc, wc) = (&types[p].chars, &types[w].chars);
            let bound = params.max_distance(pc.len(), wc.len());
            if pc.len().abs_diff(wc.len()) > bound {
                continue;
            }
            if levenshtein(pc, wc) <= bound {
                grouped[w] = true;
                members.push(w);
            }
        }
        let support = members.iter().flat_map(|&m| types[m].spans.iter().copied()).collect::<BTreeSet<_>>().len();
        if (support as f64) < needed {
            continue;
        }
        // members are already in (count desc, text asc) order
        let variants: Vec<(String, u64)> = members.iter().map(|&m| (types[m].text.clone(), types[m].count)).collect();
        groups.push(WordGroup { representative: positional_consensus(&variants), variants, support });
    }
    groups
}

/// Column-wise majority vote over the variants of the modal length.
///
/// The modal length is weighted by count with ties going to the shorter
/// length; character ties go to the smaller codepoint.
pub fn positional_consensus<S: AsRef<str>>(variants: &[(S, u64)]) -> String {
    let mut length_weight: BTreeMap<usize, u64> = BTreeMap::new();
    let decoded: Vec<(Vec<char>, u64)> = variants.iter().map(|(w, n)| (w.as_ref().chars().collect(), *n)).collect();
    for (w, n) in &decoded {
        *length_weight.entry(w.len()).or_default() += n;
    }
    let Some(modal) = length_weight
        .iter()
        .fold(None, |best: Option<(usize, u64)>, (&len, &wt)| match best {
            Some((_, bw)) if bw >= wt => best,
            _ => Some((len, wt)),
        })
        .map(|(len, _)| len)
    else {
        return String::new();
    };

    (0..modal)
        .map(|i| {
            let mut votes: BTreeMap<char, u64> = BTreeMap::new();
            for (w, n) in decoded.iter().filter(|(w, _)| w.len() == modal) {
                *votes.entry(w[i]).or_default() += n;
            }
            votes
                .into_iter()
                .fold((None, 0), |(bc, bn), (c, n)| if bc.is_none() || n > bn { (Some(c), n) } else { (bc, bn) })
                .0
                .expect("modal length has at least one variant")
        })
        .collect()
}

/// One-to-one character evidence from aligning `variant` against
/// `representative`: `(clean, observed)` for every substitution or match
/// column of a minimum edit distance alignment. Indel columns are dropped.
///
/// On equal cost the traceback prefers substitution, then a character
/// extra in the variant, then a character missing from it.
pub fn char_substitutions(variant: &str, representative: &str) -> Vec<(char, char)> {
    let v: Vec<char> = variant.chars().collect();
    let r: Vec<char> = representative.chars().collect();
    let (n, m) = (v.len(), r.len());
    let w = m + 1;
    let mut d = vec![0usize; (n + 1) * w];
    for (j, cell) in d[..w].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=n {
        d[i * w] = i;
        for j in 1..=m {
            let sub = d[(i - 1) * w + j - 1] + usize::from(v[i - 1] != r[j - 1]);
            d[i * w + j] = sub.min(d[(i - 1) * w + j] + 1).min(d[i * w + j - 1] + 1);
        }
    }

    let mut out = Vec::with_capacity(n.min(m));
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = d[i * w + j];
        if i > 0 && j > 0 && here == d[(i - 1) * w + j - 1] + usize::from(v[i - 1] != r[j - 1]) {
            out.push((r[j - 1], v[i - 1]));
            i -= 1;
            j -= 1;
        } else if i > 0 && here == d[(i - 1) * w + j] + 1 {
            i -= 1;
        } else {
            j -= 1;
        }
    }
    out.reverse();
    out
}

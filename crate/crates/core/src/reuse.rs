//! Text reuse detection: seed-and-extend local alignment between documents,
//! then single-linkage clustering of the aligned spans.
//!
//! Every `seed_len`-gram of raw codepoints is bucketed across the corpus. Each
//! pair of occurrences in a bucket is a seed hit; hits are extended in both
//! directions with a gapped x-drop alignment, and the resulting region is
//! rescored exactly with Smith-Waterman so that a pair's score is the optimal
//! local alignment score of its two span texts.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use petgraph::unionfind::UnionFind;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::io;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlignParams {
    /// Length of the exact n-gram seeds, in codepoints.
    pub seed_len: usize,
    pub match_score: i32,
    pub mismatch: i32,
    /// Linear gap penalty per gap column.
    pub gap: i32,
    /// Extension stops once the score falls this far below the best seen.
    pub x_drop: i32,
    pub min_span_len: usize,
    pub min_score: i32,
    /// Same-document spans overlapping by at least this fraction of the
    /// shorter span are merged during clustering.
    pub overlap_merge: f64,
}

impl Default for AlignParams {
    fn default() -> Self {
        AlignParams { seed_len: 10, match_score: 1, mismatch: -1, gap: -1, x_drop: 10, min_span_len: 80, min_score: 40, overlap_merge: 0.5 }
    }
}

impl AlignParams {
    pub fn validate(&self) -> Result<()> {
        if self.seed_len < 4 {
            return Err(Error::validation(format!("seed_len must be >= 4, got {}", self.seed_len)));
        }
        if !(self.overlap_merge > 0.0 && self.overlap_merge <= 1.0) {
            return Err(Error::validation(format!("overlap_merge must be in (0, 1], got {}", self.overlap_merge)));
        }
        if self.min_score <= 0 {
            return Err(Error::validation("min_score must be positive"));
        }
        if self.match_score <= 0 || self.mismatch >= 0 || self.gap >= 0 {
            return Err(Error::validation("match score must be positive, mismatch and gap scores negative"));
        }
        if self.x_drop <= 0 {
            return Err(Error::validation("x_drop must be positive"));
        }
        Ok(())
    }

    fn score(&self, a: char, b: char) -> i32 {
        if a == b {
            self.match_score
        } else {
            self.mismatch
        }
    }
}

/// A codepoint range of one document together with its text.
///
/// Ordering is by document id, then start, then end.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    #[serde(rename = "doc")]
    pub doc_id: String,
    pub start: usize,
    pub end: usize,
    pub text: String,
}

impl Span {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanPair {
    pub a: Span,
    pub b: Span,
    pub score: i32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReuseCluster {
    #[serde(rename = "cluster_id")]
    pub id: usize,
    pub spans: Vec<Span>,
}

/// Finds all pairs of spans whose optimal local alignment reaches
/// `min_score`, with both spans at least `min_span_len` long.
///
/// Output is sorted by `(a.doc, a.start, b.doc, b.start)` and does not
/// depend on the number of worker threads.
pub fn detect_pairs(corpus: &Corpus, params: &AlignParams) -> Result<Vec<SpanPair>> {
    params.validate()?;
    let docs: Vec<Vec<char>> = corpus.documents().iter().map(|d| d.text().chars().collect()).collect();
    let hits = seed_hits(&docs, params.seed_len);
    log::debug!("{} document pairs share seeds", hits.len());

    let mut pairs: Vec<SpanPair> = hits
        .par_iter()
        .flat_map_iter(|((da, db), offsets)| {
            let (da, db) = (*da as usize, *db as usize);
            align_doc_pair(&docs[da], &docs[db], da == db, offsets, params).into_iter().map(move |loc| (da, db, loc))
        })
        .filter(|(_, _, loc)| {
            loc.score >= params.min_score
                && loc.a_end - loc.a_start >= params.min_span_len
                && loc.b_end - loc.b_start >= params.min_span_len
        })
        .map(|(da, db, loc)| {
            let a = make_span(corpus, &docs, da, loc.a_start, loc.a_end);
            let b = make_span(corpus, &docs, db, loc.b_start, loc.b_end);
            if (&a.doc_id, a.start, a.end) <= (&b.doc_id, b.start, b.end) {
                SpanPair { a, b, score: loc.score }
            } else {
                SpanPair { a: b, b: a, score: loc.score }
            }
        })
        .collect();
    pairs.sort_by(|x, y| {
        (&x.a.doc_id, x.a.start, &x.b.doc_id, x.b.start, x.a.end, x.b.end).cmp(&(
            &y.a.doc_id,
            y.a.start,
            &y.b.doc_id,
            y.b.start,
            y.a.end,
            y.b.end,
        ))
    });
    pairs.dedup();
    Ok(pairs)
}

fn make_span(corpus: &Corpus, docs: &[Vec<char>], doc: usize, start: usize, end: usize) -> Span {
    Span { doc_id: corpus.documents()[doc].id().to_owned(), start, end, text: docs[doc][start..end].iter().collect() }
}

type DocPair = (u32, u32);

/// Seed hits grouped by document pair, each group sorted by offsets. Within a
/// pair the first document is the one with the smaller index; for hits inside
/// one document the first offset is the smaller.
fn seed_hits(docs: &[Vec<char>], seed_len: usize) -> Vec<(DocPair, Vec<(u32, u32)>)> {
    let mut buckets: HashMap<&[char], Vec<(u32, u32)>> = HashMap::new();
    for (d, chars) in docs.iter().enumerate() {
        for (off, gram) in chars.windows(seed_len).enumerate() {
            buckets.entry(gram).or_default().push((d as u32, off as u32));
        }
    }
    let mut by_pair: HashMap<DocPair, Vec<(u32, u32)>> = HashMap::new();
    for occ in buckets.values().filter(|v| v.len() > 1) {
        for (i, &(da, oa)) in occ.iter().enumerate() {
            for &(db, ob) in &occ[i + 1..] {
                by_pair.entry((da, db)).or_default().push((oa, ob));
            }
        }
    }
    let mut out: Vec<_> = by_pair.into_iter().collect();
    out.par_iter_mut().for_each(|(_, v)| v.sort_unstable());
    out.sort_unstable_by_key(|(k, _)| *k);
    out
}

/// Local alignment coordinates, codepoint ranges into the two documents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Local {
    a_start: usize,
    a_end: usize,
    b_start: usize,
    b_end: usize,
    score: i32,
}

impl Local {
    fn contains_hit(&self, oa: usize, ob: usize) -> bool {
        (self.a_start..self.a_end).contains(&oa) && (self.b_start..self.b_end).contains(&ob)
    }

    fn overlaps(&self, other: &Local) -> bool {
        self.a_start < other.a_end && other.a_start < self.a_end && self.b_start < other.b_end && other.b_start < self.b_end
    }
}

fn align_doc_pair(a: &[char], b: &[char], same_doc: bool, hits: &[(u32, u32)], params: &AlignParams) -> Vec<Local> {
    let mut regions: Vec<Local> = Vec::new();
    for &(oa, ob) in hits {
        let (oa, ob) = (oa as usize, ob as usize);
        if regions.iter().any(|r| r.contains_hit(oa, ob)) {
            continue;
        }
        regions.push(extend_seed(a, b, oa, ob, same_doc, params));
    }

    // Extensions from different seeds of the same passage may overlap.
    regions.sort();
    let mut merged: Vec<Local> = Vec::new();
    for r in regions {
        match merged.iter_mut().find(|m| m.overlaps(&r)) {
            Some(m) => {
                m.a_start = m.a_start.min(r.a_start);
                m.a_end = m.a_end.max(r.a_end);
                m.b_start = m.b_start.min(r.b_start);
                m.b_end = m.b_end.max(r.b_end);
            }
            None => merged.push(r),
        }
    }

    let mut out: Vec<Local> = merged
        .into_iter()
        .filter_map(|r| {
            let blocked = |i: usize, j: usize| same_doc && r.a_start + i == r.b_start + j;
            smith_waterman(&a[r.a_start..r.a_end], &b[r.b_start..r.b_end], params, blocked).map(|l| Local {
                a_start: r.a_start + l.a_start,
                a_end: r.a_start + l.a_end,
                b_start: r.b_start + l.b_start,
                b_end: r.b_start + l.b_end,
                score: l.score,
            })
        })
        .collect();
    out.sort();
    out.dedup();
    out
}

/// Extends an exact seed match at `(oa, ob)` leftwards and rightwards and
/// returns the covered region with its extension score.
fn extend_seed(a: &[char], b: &[char], oa: usize, ob: usize, same_doc: bool, params: &AlignParams) -> Local {
    let k = params.seed_len;
    let (left, li, lj) = xdrop_extend(oa, ob, |i| a[oa - 1 - i], |j| b[ob - 1 - j], |i, j| same_doc && oa - 1 - i == ob - 1 - j, params);
    let (ra, rb) = (oa + k, ob + k);
    let (right, ri, rj) =
        xdrop_extend(a.len() - ra, b.len() - rb, |i| a[ra + i], |j| b[rb + j], |i, j| same_doc && ra + i == rb + j, params);
    Local { a_start: oa - li, a_end: ra + ri, b_start: ob - lj, b_end: rb + rj, score: left + k as i32 * params.match_score + right }
}

const NEG: i32 = i32::MIN / 4;

/// Gapped x-drop extension away from an anchor. `a(i)` and `b(j)` give the
/// i-th/j-th character moving outward; `blocked(i, j)` forbids aligning
/// those two characters. Returns the best score and how many characters of
/// each sequence the best extension consumed.
fn xdrop_extend(
    la: usize,
    lb: usize,
    a: impl Fn(usize) -> char,
    b: impl Fn(usize) -> char,
    blocked: impl Fn(usize, usize) -> bool,
    params: &AlignParams,
) -> (i32, usize, usize) {
    let gap = params.gap;
    let x = params.x_drop;
    let mut prev = vec![NEG; lb + 1];
    let mut cur = vec![NEG; lb + 1];
    let (mut best, mut bi, mut bj) = (0, 0, 0);

    prev[0] = 0;
    let (mut lo, mut hi) = (0usize, 0usize);
    for j in 1..=lb {
        let s = prev[j - 1] + gap;
        if s < best - x {
            break;
        }
        prev[j] = s;
        hi = j;
    }

    for i in 1..=la {
        let (mut new_lo, mut new_hi) = (usize::MAX, 0usize);
        let in_prev = |j: usize| j >= lo && j <= hi;
        let mut j = lo;
        loop {
            if j > lb {
                break;
            }
            let mut s = NEG;
            if j >= 1 && in_prev(j - 1) && prev[j - 1] > NEG && !blocked(i - 1, j - 1) {
                s = prev[j - 1] + params.score(a(i - 1), b(j - 1));
            }
            if in_prev(j) && prev[j] > NEG {
                s = s.max(prev[j] + gap);
            }
            if j > lo && cur[j - 1] > NEG {
                s = s.max(cur[j - 1] + gap);
            }
            if s < best - x {
                s = NEG;
            }
            cur[j] = s;
            if s > NEG {
                new_lo = new_lo.min(j);
                new_hi = j;
                if s > best {
                    best = s;
                    bi = i;
                    bj = j;
                }
            } else if j > hi {
                break;
            }
            j += 1;
        }
        if new_lo == usize::MAX {
            break;
        }
        std::mem::swap(&mut prev, &mut cur);
        lo = new_lo;
        hi = new_hi;
    }
    (best, bi, bj)
}

/// Optimal local alignment with linear gaps. Among equal-scoring endpoints
/// the first in row-major order wins; cell choices prefer diagonal, then
/// gap in `b`, then gap in `a`.
fn smith_waterman(a: &[char], b: &[char], params: &AlignParams, blocked: impl Fn(usize, usize) -> bool) -> Option<Local> {
    #[derive(Clone, Copy)]
    struct Cell {
        score: i32,
        si: u32,
        sj: u32,
    }
    let zero = Cell { score: 0, si: 0, sj: 0 };
    let mut prev = vec![zero; b.len() + 1];
    let mut cur = vec![zero; b.len() + 1];
    let mut best: Option<Local> = None;
    for i in 1..=a.len() {
        cur[0] = zero;
        let ca = a[i - 1];
        for j in 1..=b.len() {
            let mut cell = zero;
            if !blocked(i - 1, j - 1) {
                let d = prev[j - 1];
                let s = d.score + params.score(ca, b[j - 1]);
                if s > 0 {
                    cell = if d.score == 0 { Cell { score: s, si: (i - 1) as u32, sj: (j - 1) as u32 } } else { Cell { score: s, ..d } };
                }
            }
            let up = prev[j];
            if up.score > 0 && up.score + params.gap > cell.score {
                cell = Cell { score: up.score + params.gap, ..up };
            }
            let left = cur[j - 1];
            if left.score > 0 && left.score + params.gap > cell.score {
                cell = Cell { score: left.score + params.gap, ..left };
            }
            cur[j] = cell;
            if cell.score > 0 && best.is_none_or(|bst| cell.score > bst.score) {
                best = Some(Local { a_start: cell.si as usize, a_end: i, b_start: cell.sj as usize, b_end: j, score: cell.score });
            }
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    best
}

/// Single-linkage clustering of aligned spans. Spans are linked when they
/// form a pair, and same-document spans overlapping by at least
/// `overlap_merge` of the shorter one are merged into their union, so every
/// input span lies inside exactly one output span. A pair whose two spans
/// merge yields a single-span cluster; `filter_clusters` removes those.
pub fn cluster_spans(pairs: &[SpanPair], params: &AlignParams) -> Vec<ReuseCluster> {
    let mut spans: Vec<&Span> = pairs.iter().flat_map(|p| [&p.a, &p.b]).collect();
    spans.sort();
    spans.dedup();
    let index = |s: &Span| spans.binary_search(&s).expect("span collected above");

    let mut uf = UnionFind::<usize>::new(spans.len());
    for p in pairs {
        uf.union(index(&p.a), index(&p.b));
    }

    // Sweep each document's spans in start order, growing a union interval.
    struct Merged {
        doc_id: String,
        start: usize,
        end: usize,
        text: Vec<char>,
        first: usize,
    }
    let mut merged: Vec<Merged> = Vec::new();
    let mut merged_of = vec![0usize; spans.len()];
    for (i, s) in spans.iter().enumerate() {
        if let Some(g) = merged.last_mut() {
            if g.doc_id == s.doc_id && s.start < g.end {
                let overlap = g.end.min(s.end) - s.start;
                let shorter = s.len().min(g.end - g.start);
                if overlap as f64 >= params.overlap_merge * shorter as f64 {
                    if s.end > g.end {
                        g.text.extend(s.text.chars().skip(g.end - s.start));
                        g.end = s.end;
                    }
                    uf.union(g.first, i);
                    merged_of[i] = merged.len() - 1;
                    continue;
                }
            }
        }
        merged_of[i] = merged.len();
        merged.push(Merged { doc_id: s.doc_id.clone(), start: s.start, end: s.end, text: s.text.chars().collect(), first: i });
    }

    let mut classes: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for (i, &m) in merged_of.iter().enumerate() {
        classes.entry(uf.find_mut(i)).or_default().insert(m);
    }
    let mut clusters: Vec<Vec<Span>> = classes
        .into_values()
        .map(|members| {
            // merged indices follow span order, so the set is already sorted
            members
                .into_iter()
                .map(|m| {
                    let g = &merged[m];
                    Span { doc_id: g.doc_id.clone(), start: g.start, end: g.end, text: g.text.iter().collect() }
                })
                .collect()
        })
        .collect();
    clusters.sort_by(|x, y| (&x[0].doc_id, x[0].start).cmp(&(&y[0].doc_id, y[0].start)));
    clusters.into_iter().enumerate().map(|(id, spans)| ReuseCluster { id, spans }).collect()
}

/// Keeps clusters with at least `min_size` spans, preserving order.
pub fn filter_clusters(clusters: Vec<ReuseCluster>, min_size: usize) -> Vec<ReuseCluster> {
    clusters.into_iter().filter(|c| c.spans.len() >= min_size).collect()
}

pub fn write_pairs(path: impl AsRef<Path>, pairs: &[SpanPair]) -> Result<()> {
    io::write_jsonl(path, pairs)
}

pub fn read_pairs(path: impl AsRef<Path>) -> Result<Vec<SpanPair>> {
    io::read_jsonl(path)
}

pub fn write_clusters(path: impl AsRef<Path>, clusters: &[ReuseCluster]) -> Result<()> {
    io::write_jsonl(path, clusters)
}

pub fn read_clusters(path: impl AsRef<Path>) -> Result<Vec<ReuseCluster>> {
    io::read_jsonl(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chars(s: &str) -> Vec<char> {
        s.chars().collect()
    }

    #[test]
    fn default_params_validate() {
        AlignParams::default().validate().unwrap();
        let bad = AlignParams { seed_len: 3, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = AlignParams { overlap_merge: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = AlignParams { min_score: 0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn xdrop_identical_runs_to_end() {
        let a = chars("abcdefghij");
        let p = AlignParams::default();
        let (s, i, j) = xdrop_extend(a.len(), a.len(), |i| a[i], |j| a[j], |_, _| false, &p);
        assert_eq!((s, i, j), (10, 10, 10));
    }

    #[test]
    fn xdrop_stops_in_random_tail() {
        let a = chars("abcdefghij0000000000000000000000");
        let b = chars("abcdefghij1111111111111111111111");
        let p = AlignParams { x_drop: 5, ..Default::default() };
        let (s, i, j) = xdrop_extend(a.len(), b.len(), |i| a[i], |j| b[j], |_, _| false, &p);
        assert_eq!((s, i, j), (10, 10, 10));
    }

    #[test]
    fn xdrop_bridges_a_gap() {
        let a = chars("abcdefghijXklmnopqrstu");
        let b = chars("abcdefghijklmnopqrstu");
        let p = AlignParams::default();
        let (s, i, j) = xdrop_extend(a.len(), b.len(), |i| a[i], |j| b[j], |_, _| false, &p);
        assert_eq!((s, i, j), (20, 22, 21));
    }

    #[test]
    fn smith_waterman_finds_embedded_match() {
        let a = chars("xxxxhello worldyyyy");
        let b = chars("zzhello worldzz");
        let l = smith_waterman(&a, &b, &AlignParams::default(), |_, _| false).unwrap();
        assert_eq!(l.score, 11);
        assert_eq!((l.a_start, l.a_end, l.b_start, l.b_end), (4, 15, 2, 13));
    }

    #[test]
    fn smith_waterman_no_match() {
        assert!(smith_waterman(&chars("aaa"), &chars("bbb"), &AlignParams::default(), |_, _| false).is_none());
    }

    fn span(doc: &str, start: usize, end: usize) -> Span {
        Span { doc_id: doc.into(), start, end, text: "x".repeat(end - start) }
    }

    fn pair(a: Span, b: Span) -> SpanPair {
        SpanPair { a, b, score: 50 }
    }

    #[test]
    fn overlapping_spans_in_one_document_merge() {
        let a = span("a", 0, 100);
        let b = span("b", 0, 100);
        let b2 = span("b", 0, 100);
        let c = span("c", 10, 110);
        let clusters = cluster_spans(&[pair(a, b), pair(b2, c)], &AlignParams::default());
        assert_eq!(clusters.len(), 1);
        assert_eq!(clusters[0].spans.len(), 3);
    }

    #[test]
    fn partially_overlapping_spans_merge_into_union() {
        // b [0,100) and b' [20,120) overlap by 80 >= 0.5 * 100
        let clusters = cluster_spans(
            &[pair(span("a", 0, 100), span("b", 0, 100)), pair(span("b", 20, 120), span("c", 0, 100))],
            &AlignParams::default(),
        );
        assert_eq!(clusters.len(), 1);
        let docs: Vec<_> = clusters[0].spans.iter().map(|s| (s.doc_id.as_str(), s.start, s.end)).collect();
        assert_eq!(docs, vec![("a", 0, 100), ("b", 0, 120), ("c", 0, 100)]);
        assert_eq!(clusters[0].spans[1].text.chars().count(), 120);
    }

    #[test]
    fn small_overlap_does_not_merge() {
        let clusters = cluster_spans(
            &[pair(span("a", 0, 100), span("b", 0, 100)), pair(span("b", 90, 190), span("c", 0, 100))],
            &AlignParams::default(),
        );
        assert_eq!(clusters.len(), 2);
    }

    #[test]
    fn disjoint_pairs_make_two_clusters() {
        let clusters = cluster_spans(
            &[pair(span("c", 0, 100), span("d", 0, 100)), pair(span("a", 0, 100), span("b", 0, 100))],
            &AlignParams::default(),
        );
        assert_eq!(clusters.len(), 2);
        assert_eq!(clusters[0].spans[0].doc_id, "a");
        assert_eq!(clusters[0].id, 0);
        assert_eq!(clusters[1].spans[0].doc_id, "c");
        assert_eq!(clusters[1].id, 1);
    }

    #[test]
    fn no_pairs_no_clusters() {
        assert!(cluster_spans(&[], &AlignParams::default()).is_empty());
    }

    fn sized(n: usize) -> ReuseCluster {
        ReuseCluster { id: n, spans: (0..n).map(|i| span(&format!("d{i}"), 0, 100)).collect() }
    }

    #[test]
    fn filter_boundary_at_twenty() {
        let kept = filter_clusters(vec![sized(20), sized(19), sized(25)], 20);
        assert_eq!(kept.iter().map(|c| c.spans.len()).collect::<Vec<_>>(), vec![20, 25]);
        assert!(filter_clusters(vec![], 20).is_empty());
    }

    #[test]
    fn cluster_json_shape() {
        let c = ReuseCluster { id: 3, spans: vec![Span { doc_id: "d".into(), start: 1, end: 3, text: "ab".into() }] };
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(s, r#"{"cluster_id":3,"spans":[{"doc":"d","start":1,"end":3,"text":"ab"}]}"#);
    }
}

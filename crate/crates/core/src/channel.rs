//! Noisy-channel token correction: a character n-gram language model as the
//! source and a confusion model as the channel, decoded with a
//! context-recombining beam search over same-length candidates.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::confusion::ConfusionModel;
use crate::corpus::{corpus_tokens, Corpus};
use crate::error::{Error, Result};
use crate::io;

/// Padding symbol marking token start and end in LM contexts.
pub const BOUNDARY: char = '\u{0}';

/// Additively smoothed character n-gram model over tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct CharLM {
    order: usize,
    k: f64,
    alphabet: BTreeSet<char>,
    counts: HashMap<Vec<char>, HashMap<char, u64>>,
    context_totals: HashMap<Vec<char>, u64>,
}

impl CharLM {
    fn empty(order: usize, k: f64) -> Self {
        CharLM { order, k, alphabet: BTreeSet::from([BOUNDARY]), counts: HashMap::new(), context_totals: HashMap::new() }
    }

    fn add_token(&mut self, token: &str) {
        let mut padded = vec![BOUNDARY; self.order - 1];
        padded.extend(token.chars());
        padded.push(BOUNDARY);
        self.alphabet.extend(token.chars());
        for gram in padded.windows(self.order) {
            let (ctx, next) = gram.split_at(self.order - 1);
            *self.counts.entry(ctx.to_vec()).or_default().entry(next[0]).or_default() += 1;
            *self.context_totals.entry(ctx.to_vec()).or_default() += 1;
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    /// Observed characters plus [`BOUNDARY`].
    pub fn alphabet(&self) -> &BTreeSet<char> {
        &self.alphabet
    }

    pub fn count(&self, context: &[char], next: char) -> u64 {
        self.counts.get(context).and_then(|r| r.get(&next)).copied().unwrap_or(0)
    }

    /// `P(next | context) = (count + k) / (context_total + k * |alphabet|)`.
    /// A context never seen with `k = 0` yields the uniform distribution.
    pub fn prob(&self, context: &[char], next: char) -> f64 {
        let total = self.context_totals.get(context).copied().unwrap_or(0) as f64;
        let denom = total + self.k * self.alphabet.len() as f64;
        if denom == 0.0 {
            return 1.0 / self.alphabet.len() as f64;
        }
        (self.count(context, next) as f64 + self.k) / denom
    }

    pub fn log_prob(&self, context: &[char], next: char) -> f64 {
        self.prob(context, next).ln()
    }

    /// Total log probability of a whole token including the end boundary.
    pub fn token_log_prob(&self, token: &str) -> f64 {
        let mut ctx = vec![BOUNDARY; self.order - 1];
        let mut total = 0.0;
        for c in token.chars().chain(std::iter::once(BOUNDARY)) {
            total += self.log_prob(&ctx, c);
            ctx.remove(0);
            ctx.push(c);
        }
        total
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        io::write_json(path, self)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        io::read_json(path)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LmFile {
    order: usize,
    k: f64,
    alphabet: Vec<char>,
    /// context string -> next char -> count
    counts: BTreeMap<String, BTreeMap<char, u64>>,
}

impl Serialize for CharLM {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        LmFile {
            order: self.order,
            k: self.k,
            alphabet: self.alphabet.iter().copied().collect(),
            counts: self.counts.iter().map(|(ctx, row)| (ctx.iter().collect(), row.iter().map(|(&c, &n)| (c, n)).collect())).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CharLM {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let file = LmFile::deserialize(d)?;
        if file.order < 2 {
            return Err(D::Error::custom("order must be >= 2"));
        }
        let mut lm = CharLM::empty(file.order, file.k);
        lm.alphabet.extend(file.alphabet);
        for (ctx, row) in file.counts {
            let ctx: Vec<char> = ctx.chars().collect();
            if ctx.len() != file.order - 1 {
                return Err(D::Error::custom("context length does not match order"));
            }
            let total: u64 = row.values().sum();
            *lm.context_totals.entry(ctx.clone()).or_default() += total;
            lm.counts.insert(ctx, row.into_iter().collect());
        }
        Ok(lm)
    }
}

/// Counts all `order`-grams of every token of the corpus, each token padded
/// with `order - 1` boundary symbols in front and one behind.
pub fn train_lm(clean_corpus: &Corpus, order: usize, k: f64) -> Result<CharLM> {
    if order < 2 {
        return Err(Error::validation(format!("LM order must be >= 2, got {order}")));
    }
    if !(k >= 0.0 && k.is_finite()) {
        return Err(Error::validation(format!("smoothing constant must be >= 0, got {k}")));
    }
    let tokens = corpus_tokens(clean_corpus);
    if tokens.is_empty() {
        return Err(Error::validation("cannot train a language model on an empty corpus"));
    }
    train_lm_on_tokens(tokens.iter().map(String::as_str), order, k)
}

/// Same as [`train_lm`] for an explicit token sequence.
pub fn train_lm_on_tokens<'a>(tokens: impl IntoIterator<Item = &'a str>, order: usize, k: f64) -> Result<CharLM> {
    if order < 2 {
        return Err(Error::validation(format!("LM order must be >= 2, got {order}")));
    }
    let mut lm = CharLM::empty(order, k);
    let mut any = false;
    for t in tokens {
        if t.contains(BOUNDARY) {
            return Err(Error::validation("tokens must not contain U+0000, it is reserved as the boundary symbol"));
        }
        lm.add_token(t);
        any = true;
    }
    if !any {
        return Err(Error::validation("cannot train a language model on an empty corpus"));
    }
    Ok(lm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecoderParams {
    pub beam_width: usize,
    /// Weight of the channel term; the LM gets `1 - lambda`.
    pub lambda: f64,
    /// Clean candidates with `P(noisy | clean)` below this are not expanded.
    pub candidate_floor: f64,
}

impl Default for DecoderParams {
    fn default() -> Self {
        DecoderParams { beam_width: 16, lambda: 0.5, candidate_floor: 1e-6 }
    }
}

impl DecoderParams {
    pub fn validate(&self) -> Result<()> {
        if self.beam_width == 0 {
            return Err(Error::validation("beam_width must be positive"));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::validation("lambda must be in [0, 1]"));
        }
        if !(self.candidate_floor >= 0.0 && self.candidate_floor <= 1.0) {
            return Err(Error::validation("candidate_floor must be in [0, 1]"));
        }
        Ok(())
    }
}

/// `weight * log_p`, where a zero weight silences the term even when
/// `log_p` is negative infinity.
fn weighted(weight: f64, log_p: f64) -> f64 {
    if weight == 0.0 {
        0.0
    } else {
        weight * log_p
    }
}

/// Log-linear score of reading `clean` as the source of `noisy`:
/// `lambda * ln P(noisy | clean) + (1 - lambda) * ln P_lm(clean)`,
/// accumulated position by position with the end boundary term last.
/// Returns negative infinity when the lengths differ.
pub fn score_candidate(noisy: &str, clean: &str, model: &ConfusionModel, lm: &CharLM, lambda: f64) -> f64 {
    let n: Vec<char> = noisy.chars().collect();
    let c: Vec<char> = clean.chars().collect();
    if n.len() != c.len() {
        return f64::NEG_INFINITY;
    }
    let mut ctx = vec![BOUNDARY; lm.order() - 1];
    let mut score = 0.0;
    for (&o, &s) in n.iter().zip(&c) {
        score += weighted(lambda, model.prob(s, o).ln()) + weighted(1.0 - lambda, lm.log_prob(&ctx, s));
        ctx.remove(0);
        ctx.push(s);
    }
    score + weighted(1.0 - lambda, lm.log_prob(&ctx, BOUNDARY))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Correction {
    pub text: String,
    /// [`score_candidate`] of `text`.
    pub score: f64,
}

/// Channel inverted for decoding: for each observed character, the clean
/// characters that could have produced it.
#[derive(Debug, Clone)]
pub struct Decoder<'a> {
    model: &'a ConfusionModel,
    lm: &'a CharLM,
    params: DecoderParams,
    sources: HashMap<char, Vec<(char, f64)>>,
}

#[derive(Clone)]
struct Hyp {
    text: Vec<char>,
    score: f64,
}

/// Higher score first, then lexicographically smaller text.
fn better(a: &Hyp, b: &Hyp) -> std::cmp::Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.text.cmp(&b.text))
}

impl<'a> Decoder<'a> {
    pub fn new(model: &'a ConfusionModel, lm: &'a CharLM, params: DecoderParams) -> Result<Self> {
        params.validate()?;
        let mut sources: HashMap<char, Vec<(char, f64)>> = HashMap::new();
        for (&clean, row) in model.counts() {
            let total = model.row_total(clean) as f64;
            for (&obs, &n) in row {
                let p = n as f64 / total;
                if p >= params.candidate_floor && p > 0.0 {
                    sources.entry(obs).or_default().push((clean, p.ln()));
                }
            }
        }
        Ok(Decoder { model, lm, params, sources })
    }

    fn candidates(&self, observed: char) -> Vec<(char, f64)> {
        let mut out = self.sources.get(&observed).cloned().unwrap_or_default();
        // a character with no row of its own reproduces itself
        if self.model.row_total(observed) == 0 {
            out.push((observed, 0.0));
        }
        out
    }

    pub fn correct(&self, noisy: &str) -> Correction {
        let order = self.lm.order();
        let lambda = self.params.lambda;
        let mut beam = vec![Hyp { text: Vec::new(), score: 0.0 }];
        let context = |text: &[char]| -> Vec<char> {
            let mut ctx = vec![BOUNDARY; order - 1];
            ctx.extend_from_slice(text);
            ctx.split_off(ctx.len() - (order - 1))
        };

        for o in noisy.chars() {
            let cands = self.candidates(o);
            if cands.is_empty() {
                return Correction { text: noisy.to_owned(), score: f64::NEG_INFINITY };
            }
            // keep the best hypothesis per LM context
            let mut by_ctx: HashMap<Vec<char>, Hyp> = HashMap::new();
            for h in &beam {
                let ctx = context(&h.text);
                for &(c, ch_lp) in &cands {
                    let score = h.score + weighted(lambda, ch_lp) + weighted(1.0 - lambda, self.lm.log_prob(&ctx, c));
                    let mut text = h.text.clone();
                    text.push(c);
                    let cand = Hyp { text, score };
                    let mut key = ctx.clone();
                    key.push(c);
                    key.remove(0);
                    match by_ctx.get(&key) {
                        Some(old) if better(old, &cand).is_le() => {}
                        _ => {
                            by_ctx.insert(key, cand);
                        }
                    }
                }
            }
            beam = by_ctx.into_values().collect();
            beam.sort_by(better);
            beam.truncate(self.params.beam_width);
        }

        let best = beam
            .into_iter()
            .map(|h| {
                let end = weighted(1.0 - lambda, self.lm.log_prob(&context(&h.text), BOUNDARY));
                Hyp { score: h.score + end, text: h.text }
            })
            .min_by(better)
            .expect("beam is never empty");
        Correction { text: best.text.into_iter().collect(), score: best.score }
    }
}

/// Most probable same-length clean token for `noisy` under the channel and
/// language model.
pub fn correct_token(noisy: &str, model: &ConfusionModel, lm: &CharLM, params: &DecoderParams) -> Result<String> {
    Ok(Decoder::new(model, lm, *params)?.correct(noisy).text)
}

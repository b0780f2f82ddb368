#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use ocr_noise::channel::{train_lm_on_tokens, BOUNDARY};
use ocr_noise::{CharLM, ConfusionModel};
use rand::Rng;

/// 30 lowercase letters.
pub const ALPHABET: &str = "abcdefghijklmnopqrstuvwxyzäöåü";

pub const SCALE: u64 = 1_000_000;

/// Ground truth channel: every row keeps `1 - rate` on the diagonal and
/// spreads `rate` over three other letters with random weights.
pub fn truth_model<R: Rng>(rng: &mut R, rate: f64) -> ConfusionModel {
    let letters: Vec<char> = ALPHABET.chars().collect();
    let off_total = (rate * SCALE as f64).round() as u64;
    let mut m = ConfusionModel::new();
    for &c in &letters {
        m.add(c, c, SCALE - off_total);
        let mut targets = Vec::new();
        while targets.len() < 3 {
            let t = letters[rng.random_range(0..letters.len())];
            if t != c && !targets.contains(&t) {
                targets.push(t);
            }
        }
        let w: Vec<u64> = (0..3).map(|_| rng.random_range(1..=10)).collect();
        let wsum: u64 = w.iter().sum();
        let mut given = 0;
        for (i, &t) in targets.iter().enumerate() {
            let n = if i == 2 { off_total - given } else { off_total * w[i] / wsum };
            given += n;
            m.add(c, t, n);
        }
    }
    m
}

/// Empirical `counts[clean][observed]` from aligned same-length pairs.
pub fn observed_counts<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> ConfusionModel {
    let mut m = ConfusionModel::new();
    for (noisy, clean) in pairs {
        assert_eq!(noisy.chars().count(), clean.chars().count());
        for (o, c) in noisy.chars().zip(clean.chars()) {
            m.add(c, o, 1);
        }
    }
    m
}

/// L1 distance between the normalized rows of `clean` in two models.
pub fn row_l1(a: &ConfusionModel, b: &ConfusionModel, clean: char) -> f64 {
    let mut keys: BTreeMap<char, ()> = BTreeMap::new();
    for m in [a, b] {
        if let Some(row) = m.counts().get(&clean) {
            keys.extend(row.keys().map(|&k| (k, ())));
        }
    }
    keys.keys().map(|&o| (a.prob(clean, o) - b.prob(clean, o)).abs()).sum()
}

/// Random word over the alphabet with a length drawn from `lengths`.
pub fn random_word<R: Rng>(rng: &mut R, lengths: &[usize]) -> String {
    let letters: Vec<char> = ALPHABET.chars().collect();
    let len = lengths[rng.random_range(0..lengths.len())];
    (0..len).map(|_| letters[rng.random_range(0..letters.len())]).collect()
}

/// Exact Viterbi over LM contexts: one state per (order-1)-gram, keeping the
/// best (score, text) per state with the lexicographically smaller text on
/// equal scores.
pub fn viterbi(noisy: &str, model: &ConfusionModel, lm: &CharLM, lambda: f64, floor: f64) -> (String, f64) {
    let n = lm.order() - 1;
    let mut states: HashMap<Vec<char>, (f64, Vec<char>)> = HashMap::new();
    states.insert(vec![BOUNDARY; n], (0.0, Vec::new()));
    for o in noisy.chars() {
        let mut cands: Vec<char> = model.alphabet().iter().copied().filter(|&c| model.row_total(c) > 0).collect();
        if model.row_total(o) == 0 {
            cands.push(o);
        }
        let mut next: HashMap<Vec<char>, (f64, Vec<char>)> = HashMap::new();
        for (ctx, (score, text)) in &states {
            for &c in &cands {
                let p = model.prob(c, o);
                if p <= 0.0 || p < floor {
                    continue;
                }
                let s = score + lambda * p.ln() + (1.0 - lambda) * lm.log_prob(ctx, c);
                let mut t = text.clone();
                t.push(c);
                let mut key = ctx[1..].to_vec();
                key.push(c);
                let replace = match next.get(&key) {
                    None => true,
                    Some((bs, bt)) => s > *bs || (s == *bs && t < *bt),
                };
                if replace {
                    next.insert(key, (s, t));
                }
            }
        }
        states = next;
    }
    states
        .into_iter()
        .map(|(ctx, (s, t))| (s + (1.0 - lambda) * lm.log_prob(&ctx, BOUNDARY), t))
        .max_by(|a, b| a.0.total_cmp(&b.0).then_with(|| b.1.cmp(&a.1)))
        .map(|(s, t)| (t.into_iter().collect(), s))
        .unwrap_or_else(|| (noisy.to_owned(), f64::NEG_INFINITY))
}

pub struct Instance {
    pub model: ConfusionModel,
    pub lm: CharLM,
    pub alphabet: Vec<char>,
}

pub fn random_instance<R: Rng>(rng: &mut R) -> Instance {
    let size = rng.random_range(2..=5);
    let alphabet: Vec<char> = "abcde".chars().take(size).collect();
    let order = rng.random_range(2..=4);
    let k = [0.0, 0.01, 0.1, 1.0][rng.random_range(0..4)];
    let tokens: Vec<String> =
        (0..rng.random_range(5..40)).map(|_| (0..rng.random_range(1..7)).map(|_| alphabet[rng.random_range(0..size)]).collect()).collect();
    let lm = train_lm_on_tokens(tokens.iter().map(String::as_str), order, k).unwrap();
    let mut model = ConfusionModel::new();
    for &c in &alphabet {
        model.add(c, c, rng.random_range(1..200));
        for &o in &alphabet {
            if o != c && rng.random_bool(0.6) {
                model.add(c, o, rng.random_range(1..60));
            }
        }
    }
    Instance { model, lm, alphabet }
}

pub fn random_token<R: Rng>(rng: &mut R, alphabet: &[char]) -> String {
    (0..rng.random_range(1..=8)).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect()
}

pub fn same_score(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() < 1e-9
}

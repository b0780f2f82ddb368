mod common;

use common::{random_instance, random_token, same_score, viterbi};
use ocr_noise::channel::{score_candidate, train_lm_on_tokens};
use ocr_noise::{CharLM, ConfusionModel, Decoder, DecoderParams};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Every same-length string over the candidate sets, scored independently.
fn brute_force(noisy: &str, model: &ConfusionModel, lm: &CharLM, lambda: f64) -> f64 {
    let chars: Vec<char> = noisy.chars().collect();
    let options: Vec<Vec<char>> =
        chars.iter().map(|&o| model.alphabet().iter().copied().chain([o]).filter(|&c| model.prob(c, o) > 0.0).collect()).collect();
    let mut best = f64::NEG_INFINITY;
    let mut idx = vec![0usize; chars.len()];
    loop {
        let s: String = idx.iter().zip(&options).map(|(&i, o)| o[i]).collect();
        best = best.max(score_candidate(noisy, &s, model, lm, lambda));
        let mut pos = 0;
        loop {
            if pos == idx.len() {
                return best;
            }
            idx[pos] += 1;
            if idx[pos] < options[pos].len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

#[test]
fn wide_beam_equals_exact_viterbi() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let inst = random_instance(&mut rng);
        let lambda = rng.random_range(0.1..0.9);
        let beam = inst.alphabet.len().pow(inst.lm.order() as u32 - 1);
        let params = DecoderParams { beam_width: beam, lambda, candidate_floor: 0.0 };
        let decoder = Decoder::new(&inst.model, &inst.lm, params).unwrap();
        let token = random_token(&mut rng, &inst.alphabet);
        let got = decoder.correct(&token);
        let (want, want_score) = viterbi(&token, &inst.model, &inst.lm, lambda, 0.0);
        if got.text != want || !same_score(got.score, want_score) {
            mismatches += 1;
        }
    }
    assert_eq!(mismatches, 0);
}

#[test]
fn viterbi_oracle_agrees_with_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..200 {
        let inst = random_instance(&mut rng);
        let token: String = random_token(&mut rng, &inst.alphabet).chars().take(5).collect();
        let (_, dp) = viterbi(&token, &inst.model, &inst.lm, 0.5, 0.0);
        let all = brute_force(&token, &inst.model, &inst.lm, 0.5);
        assert!(same_score(dp, all), "{token}: {dp} vs {all}");
    }
}

#[test]
fn reported_score_is_recomputable() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..300 {
        let inst = random_instance(&mut rng);
        let params = DecoderParams { beam_width: rng.random_range(1..10), lambda: rng.random_range(0.0..=1.0), candidate_floor: 0.0 };
        let decoder = Decoder::new(&inst.model, &inst.lm, params).unwrap();
        let token = random_token(&mut rng, &inst.alphabet);
        let got = decoder.correct(&token);
        let again = score_candidate(&token, &got.text, &inst.model, &inst.lm, params.lambda);
        assert!(same_score(got.score, again), "{} vs {again}", got.score);
        assert_eq!(got.text.chars().count(), token.chars().count());
    }
}

#[test]
fn channel_only_decoding_returns_input_when_identity_is_argmax() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let alphabet: Vec<char> = "abcdefgh".chars().collect();
    let mut model = ConfusionModel::new();
    for &c in &alphabet {
        model.add(c, c, 90);
        for _ in 0..3 {
            model.add(c, alphabet[rng.random_range(0..alphabet.len())], 3);
        }
    }
    let lm = train_lm_on_tokens(["hgfedcba", "aaaa"], 3, 0.5).unwrap();
    let params = DecoderParams { beam_width: 1, lambda: 1.0, candidate_floor: 0.0 };
    let decoder = Decoder::new(&model, &lm, params).unwrap();
    for _ in 0..200 {
        let token = random_token(&mut rng, &alphabet);
        assert_eq!(decoder.correct(&token).text, token);
    }
}

#[test]
fn unknown_characters_pass_through() {
    let mut model = ConfusionModel::identity("ab".chars());
    model.add('a', 'b', 1);
    let lm = train_lm_on_tokens(["ab", "ba"], 2, 0.1).unwrap();
    let decoder = Decoder::new(&model, &lm, DecoderParams::default()).unwrap();
    assert_eq!(decoder.correct("x1").text, "x1");
    assert_eq!(decoder.correct("").text, "");
}

/// A wider beam can drop a hypothesis the narrower beam kept, so the
/// returned score is not monotone in the width below the exact width.
#[test]
fn beam_width_monotonicity_has_a_counterexample() {
    let mut rng = ChaCha8Rng::seed_from_u64(8772918536047615516);
    let inst = random_instance(&mut rng);
    let token = random_token(&mut rng, &inst.alphabet);
    let lambda = rng.random_range(0.1..0.9);
    let run = |beam_width| {
        let params = DecoderParams { beam_width, lambda, candidate_floor: 0.0 };
        Decoder::new(&inst.model, &inst.lm, params).unwrap().correct(&token).score
    };
    assert!(run(3) < run(2) - 1e-9);
    let exact = inst.alphabet.len().pow(inst.lm.order() as u32 - 1);
    assert!(run(exact) >= run(2));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn no_width_beats_the_exact_optimum(seed in any::<u64>(), width in 1usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_instance(&mut rng);
        let token = random_token(&mut rng, &inst.alphabet);
        let lambda = rng.random_range(0.1..0.9);
        let run = |beam_width| {
            let params = DecoderParams { beam_width, lambda, candidate_floor: 0.0 };
            Decoder::new(&inst.model, &inst.lm, params).unwrap().correct(&token).score
        };
        let (_, best) = viterbi(&token, &inst.model, &inst.lm, lambda, 0.0);
        let exact = inst.alphabet.len().pow(inst.lm.order() as u32 - 1);
        let got = run(width);
        prop_assert!(got <= best + 1e-9 || same_score(got, best));
        // at and beyond the exact width, widening never lowers the score
        let (a, b) = (run(exact), run(exact + width));
        prop_assert!(same_score(a, best) && same_score(b, best));
    }
}

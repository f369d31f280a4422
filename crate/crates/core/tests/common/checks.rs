//! Randomized equivalence checks shared by the integration and acceptance tests.
//! Each returns the number of cases checked, or a description of the first failure.

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use spoilkit_core::corpus::ClickbaitPost;
use spoilkit_core::metrics::{bleu4, meteor_reduced};
use spoilkit_core::qa_prep::{align_answer, make_windows, ReferenceTokenizer, Task};
use spoilkit_core::retrieval::{reduce_context, Bm25Params};
use spoilkit_core::span_select::{best_span_in_window, recover_text, LogitSheet};
use spoilkit_core::SpoilerType;

use super::*;

fn bare_post(paragraphs: Vec<String>, title: String) -> ClickbaitPost {
    ClickbaitPost {
        id: "r".into(),
        title_text: title,
        paragraphs,
        gold_spoilers: vec![],
        positions: vec![],
        spoiler_type: None,
        aux_question: None,
    }
}

/// reduce_context against the brute-force BM25 score sort.
pub fn bm25_equivalence(trials: usize, seed: u64) -> Result<usize, String> {
    let mut rng = StdRng::seed_from_u64(seed);
    let params = Bm25Params::default();
    for trial in 0..trials {
        let n_docs = rng.gen_range(1..=50);
        let paragraphs: Vec<String> = (0..n_docs).map(|_| random_sentence(&mut rng, 20)).collect();
        let mut title = random_sentence(&mut rng, 6);
        if rng.gen_bool(0.1) {
            title.push_str(" zebra");
        }
        let k = rng.gen_range(1..=n_docs + 1);
        let post = bare_post(paragraphs.clone(), title.clone());
        let got = reduce_context(&post, k, params).map_err(|e| format!("trial {trial}: {e}"))?;
        let want = bm25_top_k(&paragraphs, &title, k, params.k1, params.b);
        if got.kept_indices != want {
            return Err(format!(
                "trial {trial}: k={k} title={title:?} got {:?} want {want:?} paragraphs={paragraphs:?}",
                got.kept_indices
            ));
        }
        let texts: Vec<&String> = got.kept_indices.iter().map(|&i| &paragraphs[i]).collect();
        if got.paragraphs.iter().collect::<Vec<_>>() != texts {
            return Err(format!("trial {trial}: paragraph texts do not follow kept indices"));
        }
    }
    Ok(trials)
}

/// best_span_in_window against exhaustive (i, j) search.
pub fn span_argmax_equivalence(trials: usize, seed: u64) -> Result<usize, String> {
    let mut rng = StdRng::seed_from_u64(seed);
    for trial in 0..trials {
        let n_words = if rng.gen_bool(0.03) { 0 } else { rng.gen_range(1..=60) };
        let context = random_context(&mut rng, n_words);
        let max_len = rng.gen_range(12..=80);
        let windows = make_windows(&ReferenceTokenizer, "s", Task::Orig, "what now", &context, max_len, 4)
            .map_err(|e| format!("trial {trial}: {e}"))?;
        let window = windows.choose(&mut rng).unwrap();
        let sheet = LogitSheet {
            post_id: "s".into(),
            task: Task::Orig,
            window_index: window.window_index,
            start_logits: random_logits(&mut rng, window.len()),
            end_logits: random_logits(&mut rng, window.len()),
        };
        let max_answer = rng.gen_range(1..=40);
        let got =
            best_span_in_window(&sheet, window, &context, max_answer).map_err(|e| format!("trial {trial}: {e}"))?;
        let (lo, hi) = window.context_tokens;
        let want = span_argmax(&sheet.start_logits, &sheet.end_logits, lo, hi, max_answer).unwrap_or((0, 0));
        if (got.start_token, got.end_token) != want {
            return Err(format!("trial {trial}: got ({}, {}) want {want:?}", got.start_token, got.end_token));
        }
        if want != (0, 0) {
            let s = window.offsets[want.0].unwrap().0;
            let e = window.offsets[want.1].unwrap().1;
            if got.text != char_slice(&context, s, e) {
                return Err(format!("trial {trial}: text {:?} is not the context slice", got.text));
            }
        }
    }
    Ok(trials)
}

/// Window tiling covers the context and every contained gold span round-trips.
pub fn window_coverage(pairs: usize, seed: u64, max_len: usize, stride: usize) -> Result<usize, String> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut spans_checked = 0;
    for pair in 0..pairs {
        let q_words = rng.gen_range(1..=12);
        let question = random_context(&mut rng, q_words);
        let c_words = rng.gen_range(1..=900);
        let context = random_context(&mut rng, c_words);
        let len = context.chars().count();
        let windows = make_windows(&ReferenceTokenizer, "w", Task::Orig, &question, &context, max_len, stride)
            .map_err(|e| format!("pair {pair}: {e}"))?;
        if windows.first().unwrap().context_char_span.0 != 0 || windows.last().unwrap().context_char_span.1 != len {
            return Err(format!("pair {pair}: windows do not reach both ends of the context"));
        }
        for w in windows.windows(2) {
            let (a, b) = (w[0].context_char_span, w[1].context_char_span);
            if !(b.0 <= a.1 && a.0 < b.0 && a.1 <= b.1) {
                return Err(format!("pair {pair}: gap or disorder between {a:?} and {b:?}"));
            }
        }
        if windows.iter().any(|w| w.len() > max_len) {
            return Err(format!("pair {pair}: window longer than {max_len}"));
        }
        let tokens = ref_tokens_with_offsets(&context);
        if tokens.is_empty() {
            continue;
        }
        for _ in 0..5 {
            let first = rng.gen_range(0..tokens.len());
            let last = (first + rng.gen_range(0..30)).min(tokens.len() - 1);
            let (start, end) = (tokens[first].1, tokens[last].2);
            let gold = char_slice(&context, start, end);
            let mut inside = 0;
            for w in &windows {
                let (ws, we) = w.context_char_span;
                if start < ws || end > we {
                    continue;
                }
                inside += 1;
                let aligned = align_answer(w, (start, end), SpoilerType::Phrase, 0.5).ok_or_else(|| {
                    format!("pair {pair}: span {start}..{end} inside window {} did not align", w.window_index)
                })?;
                let text = recover_text(w, (aligned.start_token, aligned.end_token), &context)
                    .map_err(|e| format!("pair {pair}: {e}"))?;
                if text != gold {
                    return Err(format!("pair {pair}: recovered {text:?} instead of {gold:?}"));
                }
            }
            if inside == 0 && last - first < stride {
                return Err(format!("pair {pair}: span of {} tokens fits no window", last - first + 1));
            }
            spans_checked += 1;
        }
    }
    Ok(spans_checked)
}

/// Deterministic 50-pair BLEU fixture: hand-picked edge cases plus seeded random pairs.
pub fn bleu_pairs() -> Vec<(String, String)> {
    let mut pairs: Vec<(String, String)> = [
        ("the cat sat", "the cat sat down"),
        ("the cat sat on the mat", "the cat sat on the mat"),
        ("a x b", "a b c"),
        ("the the the the", "the cat"),
        ("More butter.", "more butter"),
        ("Tallinn", "Tallinn, Estonia"),
        ("about 6 weeks before departure", "6 weeks before departure"),
        ("", "empty hypothesis"),
        ("dogs", "cats"),
        ("one two three four five six", "six five four three two one"),
    ]
    .iter()
    .map(|(a, b)| (a.to_string(), b.to_string()))
    .collect();
    let mut rng = StdRng::seed_from_u64(0xb1e0);
    while pairs.len() < 50 {
        let r = random_sentence(&mut rng, 14);
        let h = if rng.gen_bool(0.5) {
            // Perturbed copy of the reference.
            let mut words: Vec<&str> = r.split(' ').collect();
            if words.len() > 2 && rng.gen_bool(0.5) {
                words.remove(rng.gen_range(0..words.len()));
            }
            if rng.gen_bool(0.5) {
                words.push(VOCAB.choose(&mut rng).unwrap());
            }
            words.join(" ")
        } else {
            random_sentence(&mut rng, 14)
        };
        pairs.push((h, r));
    }
    pairs
}

/// Largest absolute BLEU difference from the independent evaluator over the fixture.
pub fn bleu_max_error() -> (f64, usize) {
    let pairs = bleu_pairs();
    let err = pairs.iter().map(|(h, r)| (bleu4(h, r) - bleu_oracle(h, r)).abs()).fold(0.0, f64::max);
    (err, pairs.len())
}

pub const METEOR_PAIRS: [(&str, &str); 20] = [
    ("butter", "butter"),
    ("more butter", "more butter"),
    ("butter", "more butter"),
    ("the cat sat", "the cat sat down"),
    ("he runs fast", "he running fast"),
    ("runs run", "run"),
    ("the cat the dog", "the dog the cat"),
    ("a b a b", "b a b a"),
    ("cities burned", "the city burns"),
    ("walked home", "home walking"),
    ("x y z", "p q r"),
    ("Zoë Hart", "zoë hart"),
    ("20 minutes", "about 20 minutes"),
    ("red car blue car", "blue car red car"),
    ("baking bread", "baked breads"),
    ("the the", "the"),
    ("jumps over", "jumped over the"),
    ("quick brown fox", "the quick brown fox"),
    ("fox brown quick", "quick brown fox"),
    ("state of the art", "the art of state"),
];

pub fn meteor_max_error() -> (f64, usize) {
    let err = METEOR_PAIRS.iter().map(|(h, r)| (meteor_reduced(h, r) - meteor_oracle(h, r)).abs()).fold(0.0, f64::max);
    (err, METEOR_PAIRS.len())
}

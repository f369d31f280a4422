//! Independent reference implementations used as test oracles.
//!
//! Nothing here calls into the library's own scoring code; shared pieces are
//! limited to data types and the stemmer.
#![allow(dead_code, clippy::needless_range_loop)]

pub mod checks;

use rand::seq::SliceRandom;
use rand::Rng;

// ---------------------------------------------------------------- tokenizers

/// Lowercased runs of alphanumeric chars.
pub fn alnum_words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            cur.push(c);
        } else if !cur.is_empty() {
            out.push(cur.to_lowercase());
            cur.clear();
        }
    }
    if !cur.is_empty() {
        out.push(cur.to_lowercase());
    }
    out
}

/// Alphanumeric runs plus every other non-space char as its own token, with char offsets.
pub fn ref_tokens_with_offsets(text: &str) -> Vec<(String, usize, usize)> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_alphanumeric() {
            let start = i;
            while i < chars.len() && chars[i].is_alphanumeric() {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            out.push((word.to_lowercase(), start, i));
        } else {
            if !c.is_whitespace() {
                out.push((c.to_lowercase().collect(), i, i + 1));
            }
            i += 1;
        }
    }
    out
}

pub fn ref_tokens(text: &str) -> Vec<String> {
    ref_tokens_with_offsets(text).into_iter().map(|t| t.0).collect()
}

pub fn char_slice(text: &str, start: usize, end: usize) -> String {
    text.chars().skip(start).take(end - start).collect()
}

// ---------------------------------------------------------------------- BM25

/// Brute-force BM25 top-k by recounting every statistic and sorting scores.
pub fn bm25_top_k(paragraphs: &[String], query: &str, k: usize, k1: f64, b: f64) -> Vec<usize> {
    let n = paragraphs.len();
    if k >= n {
        return (0..n).collect();
    }
    let docs: Vec<Vec<String>> = paragraphs.iter().map(|p| alnum_words(p)).collect();
    let total: usize = docs.iter().map(Vec::len).sum();
    if total == 0 {
        return (0..k).collect();
    }
    let avg = total as f64 / n as f64;
    let q = alnum_words(query);
    let mut scored: Vec<(f64, usize)> = (0..n)
        .map(|d| {
            let norm = k1 * (1.0 - b + b * docs[d].len() as f64 / avg);
            let mut s = 0.0;
            for term in &q {
                let tf = docs[d].iter().filter(|t| *t == term).count() as f64;
                if tf == 0.0 {
                    s += 0.0;
                    continue;
                }
                let df = docs.iter().filter(|doc| doc.contains(term)).count() as f64;
                let idf = ((n as f64 - df + 0.5) / (df + 0.5) + 1.0).ln();
                s += idf * tf * (k1 + 1.0) / (tf + norm);
            }
            (s, d)
        })
        .collect();
    // Bubble sort: score descending, index ascending.
    for i in 0..scored.len() {
        for j in 0..scored.len() - 1 - i {
            let (a, b) = (scored[j], scored[j + 1]);
            if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                scored.swap(j, j + 1);
            }
        }
    }
    let mut keep: Vec<usize> = scored[..k].iter().map(|x| x.1).collect();
    keep.sort();
    keep
}

// ---------------------------------------------------------------------- spans

/// Exhaustive (i, j) argmax of `start[i] + end[j]` over context tokens,
/// `j - i < max_len`; ties to smaller i then smaller j.
pub fn span_argmax(start: &[f64], end: &[f64], lo: usize, hi: usize, max_len: usize) -> Option<(usize, usize)> {
    let mut all = Vec::new();
    for i in lo..hi {
        for j in lo..hi {
            if j >= i && j - i < max_len {
                all.push((start[i] + end[j], i, j));
            }
        }
    }
    let best = all.iter().map(|x| x.0).fold(f64::NEG_INFINITY, f64::max);
    all.into_iter().filter(|x| x.0 == best).map(|x| (x.1, x.2)).min()
}

// ---------------------------------------------------------------------- BLEU

fn grams(tokens: &[String], n: usize) -> Vec<Vec<String>> {
    if tokens.len() < n {
        return Vec::new();
    }
    (0..=tokens.len() - n).map(|i| tokens[i..i + n].to_vec()).collect()
}

/// Sentence BLEU-4 written from the metric's definition.
pub fn bleu_oracle(hyp: &str, reference: &str) -> f64 {
    let h = ref_tokens(hyp);
    let r = ref_tokens(reference);
    if h.is_empty() {
        return 0.0;
    }
    let mut logs = Vec::new();
    for n in 1..=4 {
        if h.len() < n {
            break;
        }
        let hg = grams(&h, n);
        let rg = grams(&r, n);
        let mut distinct: Vec<&Vec<String>> = Vec::new();
        for g in &hg {
            if !distinct.contains(&g) {
                distinct.push(g);
            }
        }
        let matched: usize = distinct
            .iter()
            .map(|g| {
                let ch = hg.iter().filter(|x| x == g).count();
                let cr = rg.iter().filter(|x| x == g).count();
                ch.min(cr)
            })
            .sum();
        if n == 1 && matched == 0 {
            return 0.0;
        }
        let total = hg.len();
        let p = if matched == 0 { 1.0 / (total as f64 + 1.0) } else { matched as f64 / total as f64 };
        logs.push(p.ln());
    }
    let geo = (logs.iter().sum::<f64>() / logs.len() as f64).exp();
    let (c, rl) = (h.len() as f64, r.len() as f64);
    let bp = if c < rl { (1.0 - rl / c).exp() } else { 1.0 };
    100.0 * bp * geo
}

// -------------------------------------------------------------------- METEOR

/// Brute-force reduced METEOR: enumerate every unigram matching, keep those
/// with the most exact pairs, then the most pairs, then the fewest chunks.
pub fn meteor_oracle(hyp: &str, reference: &str) -> f64 {
    let h = ref_tokens(hyp);
    let r = ref_tokens(reference);
    if h.is_empty() || r.is_empty() {
        return 0.0;
    }
    let hs: Vec<String> = h.iter().map(|t| spoilkit_core::metrics::stem(t)).collect();
    let rs: Vec<String> = r.iter().map(|t| spoilkit_core::metrics::stem(t)).collect();
    // (exact, total, chunks)
    let mut best: Option<(usize, usize, usize)> = None;
    let mut assignment: Vec<Option<usize>> = vec![None; h.len()];
    fn walk(
        i: usize,
        h: &[String],
        hs: &[String],
        r: &[String],
        rs: &[String],
        assignment: &mut Vec<Option<usize>>,
        best: &mut Option<(usize, usize, usize)>,
    ) {
        if i == h.len() {
            let pairs: Vec<(usize, usize)> =
                assignment.iter().enumerate().filter_map(|(a, b)| b.map(|b| (a, b))).collect();
            let exact = pairs.iter().filter(|(a, b)| h[*a] == r[*b]).count();
            let mut chunks = 0;
            for (k, &(a, b)) in pairs.iter().enumerate() {
                if k == 0 || !(pairs[k - 1].0 + 1 == a && pairs[k - 1].1 + 1 == b) {
                    chunks += 1;
                }
            }
            let cand = (exact, pairs.len(), chunks);
            let better = match best {
                None => true,
                Some(bb) => (cand.0, cand.1) > (bb.0, bb.1) || ((cand.0, cand.1) == (bb.0, bb.1) && cand.2 < bb.2),
            };
            if better {
                *best = Some(cand);
            }
            return;
        }
        assignment[i] = None;
        walk(i + 1, h, hs, r, rs, assignment, best);
        for j in 0..r.len() {
            if assignment[..i].contains(&Some(j)) {
                continue;
            }
            if h[i] == r[j] || hs[i] == rs[j] {
                assignment[i] = Some(j);
                walk(i + 1, h, hs, r, rs, assignment, best);
                assignment[i] = None;
            }
        }
    }
    walk(0, &h, &hs, &r, &rs, &mut assignment, &mut best);
    let (_, m, chunks) = best.unwrap();
    if m == 0 {
        return 0.0;
    }
    let p = m as f64 / h.len() as f64;
    let rc = m as f64 / r.len() as f64;
    let f = 10.0 * p * rc / (rc + 9.0 * p);
    let whole = chunks == 1 && m == h.len() && m == r.len();
    let frag = if whole { 0.0 } else { 0.5 * (chunks as f64 / m as f64).powi(3) };
    100.0 * f * (1.0 - frag)
}

// ------------------------------------------------------------ classification

/// Per-class F1 as 2TP / (2TP + FP + FN), 0 without true positives.
pub fn f1_oracle(preds: &[usize], gold: &[usize]) -> (f64, [f64; 3]) {
    let mut per = [0.0; 3];
    for c in 0..3 {
        let mut tp = 0.0;
        let mut fp = 0.0;
        let mut fn_ = 0.0;
        for (p, g) in preds.iter().zip(gold) {
            match (*p == c, *g == c) {
                (true, true) => tp += 1.0,
                (true, false) => fp += 1.0,
                (false, true) => fn_ += 1.0,
                _ => {}
            }
        }
        per[c] = if tp == 0.0 { 0.0 } else { 2.0 * tp / (2.0 * tp + fp + fn_) };
    }
    ((per[0] + per[1] + per[2]) / 3.0, per)
}

// -------------------------------------------------------------------- t-test

/// Student t CDF for four degrees of freedom in closed form.
pub fn t_cdf_df4(t: f64) -> f64 {
    let u = 1.0 + t * t / 4.0;
    0.5 + 0.375 * t / u.sqrt() * (1.0 - t * t / (12.0 * u))
}

/// (t, two-sided p) for a five-sample one-sample test.
pub fn ttest_df4_oracle(samples: &[f64; 5], mu0: f64) -> (f64, f64) {
    let mean = samples.iter().sum::<f64>() / 5.0;
    let ss: f64 = samples.iter().map(|x| (x - mean) * (x - mean)).sum();
    let sd = (ss / 4.0).sqrt();
    let t = (mean - mu0) / (sd / 5f64.sqrt());
    let p = 2.0 * (1.0 - t_cdf_df4(t.abs()));
    (t, p)
}

pub const TTEST_FIXTURE: [f64; 5] = [74.0, 75.0, 76.0, 74.5, 75.5];
pub const TTEST_BASELINE: f64 = 73.63;

// ---------------------------------------------------------------- generators

pub const VOCAB: [&str; 14] =
    ["cat", "dog", "Cat", "bird", "fish", "tree", "house", "car", "red", "blue", "runs", "running", "the", "a"];

pub fn random_sentence<R: Rng>(rng: &mut R, max_words: usize) -> String {
    let n = rng.gen_range(0..=max_words);
    let mut words = Vec::with_capacity(n);
    for _ in 0..n {
        let w = VOCAB.choose(rng).unwrap().to_string();
        let w = match rng.gen_range(0..10) {
            0 => format!("{w},"),
            1 => format!("{w}."),
            _ => w,
        };
        words.push(w);
    }
    words.join(" ")
}

const WORDS: [&str; 24] = [
    "alpha", "beta", "gamma", "delta", "café", "naïve", "über", "x", "y", "42", "2024", "don't", "e-mail", "state",
    "of", "the", "art", "zoë", "émigré", "quick", "brown", "fox", "jumps", "lazy",
];

/// Context text with mixed punctuation, unicode and irregular spacing.
pub fn random_context<R: Rng>(rng: &mut R, n_words: usize) -> String {
    let mut out = String::new();
    for k in 0..n_words {
        if k > 0 {
            out.push_str(match rng.gen_range(0..12) {
                0 => "  ",
                1 => "\n",
                _ => " ",
            });
        }
        out.push_str(WORDS.choose(rng).unwrap());
        match rng.gen_range(0..15) {
            0 => out.push(','),
            1 => out.push('.'),
            2 => out.push_str("?!"),
            _ => {}
        }
    }
    out
}

pub fn random_logits<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| match rng.gen_range(0..4) {
            // Coarse values force ties.
            0 => rng.gen_range(-3..=3) as f64,
            _ => rng.gen_range(-8.0..8.0),
        })
        .collect()
}

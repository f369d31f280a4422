use std::collections::HashMap;

use super::metric_tokens;

pub const BLEU_ORDER: usize = 4;

/// Counts of all n-grams of length `n`.
pub fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if n == 0 || tokens.len() < n {
        return counts;
    }
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

/// Clipped matches and hypothesis n-gram total for one order.
fn clipped(hyp: &[String], reference: &[String], n: usize) -> (usize, usize) {
    let h = ngram_counts(hyp, n);
    let r = ngram_counts(reference, n);
    let matched = h.iter().map(|(g, &c)| c.min(r.get(g).copied().unwrap_or(0))).sum();
    (matched, hyp.len().saturating_sub(n - 1))
}

fn brevity_penalty(c: usize, r: usize) -> f64 {
    if c < r {
        (1.0 - r as f64 / c as f64).exp()
    } else {
        1.0
    }
}

/// Geometric mean of precisions over the orders the hypothesis can fill.
/// Zero-match orders are smoothed as (m + 1) / (t + 1).
fn geometric_mean(stats: &[(usize, usize)]) -> f64 {
    let orders: Vec<_> = stats.iter().filter(|(_, t)| *t > 0).collect();
    if orders.is_empty() {
        return 0.0;
    }
    let log_sum: f64 = orders
        .iter()
        .map(|&&(m, t)| if m == 0 { ((m + 1) as f64 / (t + 1) as f64).ln() } else { (m as f64 / t as f64).ln() })
        .sum();
    (log_sum / orders.len() as f64).exp()
}

fn score_from_stats(stats: &[(usize, usize)], c: usize, r: usize) -> f64 {
    if c == 0 || stats[0].0 == 0 {
        return 0.0;
    }
    let value = 100.0 * brevity_penalty(c, r) * geometric_mean(stats);
    value.clamp(0.0, 100.0)
}

fn sentence_stats(hyp: &[String], reference: &[String]) -> Vec<(usize, usize)> {
    (1..=BLEU_ORDER).map(|n| clipped(hyp, reference, n)).collect()
}

/// Sentence-level BLEU-4 on a 0–100 scale.
///
/// Orders longer than the hypothesis are left out of the mean. An empty
/// hypothesis, or one sharing no unigram with the reference, scores 0.
pub fn bleu4(hypothesis: &str, reference: &str) -> f64 {
    let h = metric_tokens(hypothesis);
    let r = metric_tokens(reference);
    score_from_stats(&sentence_stats(&h, &r), h.len(), r.len())
}

/// Corpus-level BLEU-4: counts and lengths are summed before combining.
pub fn corpus_bleu4<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> f64 {
    let mut totals = vec![(0usize, 0usize); BLEU_ORDER];
    let (mut c, mut r) = (0, 0);
    for (hyp, reference) in pairs {
        let h = metric_tokens(hyp);
        let rf = metric_tokens(reference);
        for (acc, (m, t)) in totals.iter_mut().zip(sentence_stats(&h, &rf)) {
            acc.0 += m;
            acc.1 += t;
        }
        c += h.len();
        r += rf.len();
    }
    score_from_stats(&totals, c, r)
}

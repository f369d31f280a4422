//! Okapi BM25 over a single post's paragraphs, and top-k context reduction.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::ClickbaitPost;
use crate::error::{Error, Result};

/// Default number of paragraphs kept by [`reduce_context`].
pub const DEFAULT_TOP_K: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.5, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1 > 0.0 && self.k1.is_finite()) {
            return Err(Error::invalid(format!("k1 must be positive, got {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(Error::invalid(format!("b must lie in [0, 1], got {}", self.b)));
        }
        Ok(())
    }
}

/// Lowercase and split on runs of non-alphanumeric chars. No stemming, no stopwords.
pub fn bm25_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_lowercase).collect()
}

#[derive(Debug, Clone)]
pub struct Bm25Index {
    doc_term_freqs: Vec<HashMap<String, u32>>,
    doc_lengths: Vec<usize>,
    avg_doc_length: f64,
    doc_freqs: HashMap<String, usize>,
    params: Bm25Params,
}

impl Bm25Index {
    /// Fails on an empty list, invalid params, or when no paragraph has a single token.
    pub fn build<S: AsRef<str>>(paragraphs: &[S], params: Bm25Params) -> Result<Self> {
        params.validate()?;
        if paragraphs.is_empty() {
            return Err(Error::invalid("cannot index an empty paragraph list"));
        }
        let mut doc_term_freqs = Vec::with_capacity(paragraphs.len());
        let mut doc_lengths = Vec::with_capacity(paragraphs.len());
        let mut doc_freqs: HashMap<String, usize> = HashMap::new();
        for p in paragraphs {
            let tokens = bm25_tokens(p.as_ref());
            doc_lengths.push(tokens.len());
            let mut tf: HashMap<String, u32> = HashMap::new();
            for t in tokens {
                *tf.entry(t).or_default() += 1;
            }
            for term in tf.keys() {
                *doc_freqs.entry(term.clone()).or_default() += 1;
            }
            doc_term_freqs.push(tf);
        }
        let total: usize = doc_lengths.iter().sum();
        if total == 0 {
            return Err(Error::invalid("paragraphs contain no indexable tokens"));
        }
        let avg_doc_length = total as f64 / paragraphs.len() as f64;
        Ok(Self { doc_term_freqs, doc_lengths, avg_doc_length, doc_freqs, params })
    }

    pub fn n_docs(&self) -> usize {
        self.doc_lengths.len()
    }

    pub fn avg_doc_length(&self) -> f64 {
        self.avg_doc_length
    }

    pub fn doc_length(&self, doc: usize) -> usize {
        self.doc_lengths[doc]
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.doc_freqs.get(term).copied().unwrap_or(0)
    }

    pub fn term_freq(&self, doc: usize, term: &str) -> u32 {
        self.doc_term_freqs[doc].get(term).copied().unwrap_or(0)
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    /// `ln((N - df + 0.5) / (df + 0.5) + 1)`, always positive.
    pub fn idf(&self, term: &str) -> f64 {
        let n = self.n_docs() as f64;
        let df = self.doc_freq(term) as f64;
        ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
    }

    /// BM25 score of paragraph `doc` for a raw query string.
    ///
    /// Repeated query terms contribute once per occurrence.
    pub fn score(&self, query: &str, doc: usize) -> Result<f64> {
        if doc >= self.n_docs() {
            return Err(Error::invalid(format!("document {doc} out of range ({} docs)", self.n_docs())));
        }
        Ok(self.score_tokens(&bm25_tokens(query), doc))
    }

    pub fn score_tokens(&self, query: &[String], doc: usize) -> f64 {
        let Bm25Params { k1, b } = self.params;
        let norm = k1 * (1.0 - b + b * self.doc_lengths[doc] as f64 / self.avg_doc_length);
        query
            .iter()
            .map(|term| {
                let tf = self.term_freq(doc, term) as f64;
                if tf == 0.0 {
                    0.0
                } else {
                    self.idf(term) * tf * (k1 + 1.0) / (tf + norm)
                }
            })
            .sum()
    }

    pub fn scores(&self, query: &str) -> Vec<f64> {
        let q = bm25_tokens(query);
        (0..self.n_docs()).map(|d| self.score_tokens(&q, d)).collect()
    }
}

/// Free-function form of [`Bm25Index::score`].
pub fn bm25_score(index: &Bm25Index, query: &str, doc: usize) -> Result<f64> {
    index.score(query, doc)
}

/// Paragraphs of a post kept after BM25 reduction, in document order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedContext {
    pub post_id: String,
    pub kept_indices: Vec<usize>,
    #[serde(skip)]
    pub paragraphs: Vec<String>,
    pub k: usize,
}

impl ReducedContext {
    /// True when nothing was dropped.
    pub fn is_full(&self, n_paragraphs: usize) -> bool {
        self.kept_indices.len() == n_paragraphs
    }

    /// Audit line `{"post_id":..,"kept_indices":[..],"k":..}`.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("serializable")
    }
}

/// Indices of the `k` highest-scoring entries, ties to the lower index, returned sorted ascending.
pub fn top_k_indices(scores: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    order.sort_unstable();
    order
}

/// Keep the `k` paragraphs that best match the post's title.
///
/// When `k` covers every paragraph the full list comes back unchanged. A
/// post whose paragraphs have no indexable tokens keeps its first `k`.
pub fn reduce_context(post: &ClickbaitPost, k: usize, params: Bm25Params) -> Result<ReducedContext> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let n = post.paragraphs.len();
    let kept_indices = if k >= n {
        (0..n).collect()
    } else {
        match Bm25Index::build(&post.paragraphs, params) {
            Ok(index) => top_k_indices(&index.scores(&post.title_text), k),
            Err(Error::InvalidInput(_)) if n > 0 => (0..k).collect(),
            Err(e) => return Err(e),
        }
    };
    let paragraphs = kept_indices.iter().map(|&i| post.paragraphs[i].clone()).collect();
    Ok(ReducedContext { post_id: post.id.clone(), kept_indices, paragraphs, k })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn post(paragraphs: &[&str], title: &str) -> ClickbaitPost {
        ClickbaitPost {
            id: "x".into(),
            title_text: title.into(),
            paragraphs: paragraphs.iter().map(|s| s.to_string()).collect(),
            gold_spoilers: vec![],
            positions: vec![],
            spoiler_type: None,
            aux_question: None,
        }
    }

    #[test]
    fn tokenization_rule() {
        assert_eq!(bm25_tokens("Hello, WORLD! it's 2024"), vec!["hello", "world", "it", "s", "2024"]);
        assert!(bm25_tokens(" ,.; ").is_empty());
    }

    #[test]
    fn index_statistics_by_hand() {
        let idx = Bm25Index::build(&["a b", "b c"], Bm25Params::default()).unwrap();
        assert_eq!(idx.n_docs(), 2);
        assert_eq!(idx.doc_freq("b"), 2);
        assert_eq!(idx.doc_freq("a"), 1);
        assert_eq!(idx.avg_doc_length(), 2.0);

        let single = Bm25Index::build(&["one two three"], Bm25Params::default()).unwrap();
        assert_eq!(single.avg_doc_length(), 3.0);
    }

    #[test]
    fn build_errors() {
        let empty: [&str; 0] = [];
        assert!(Bm25Index::build(&empty, Bm25Params::default()).is_err());
        assert!(Bm25Index::build(&["..."], Bm25Params::default()).is_err());
        assert!(Bm25Index::build(&["a"], Bm25Params { k1: 0.0, b: 0.5 }).is_err());
        assert!(Bm25Index::build(&["a"], Bm25Params { k1: 1.0, b: 1.5 }).is_err());
    }

    #[test]
    fn unrelated_query_scores_zero() {
        let idx = Bm25Index::build(&["a b c", "b c d", "x y z"], Bm25Params::default()).unwrap();
        assert_eq!(idx.score("q r", 0).unwrap(), 0.0);
        assert!(idx.score("a", 3).is_err());
    }

    #[test]
    fn argmax_is_doc_with_both_terms() {
        let idx = Bm25Index::build(&["a b c", "b c d", "x y z"], Bm25Params::default()).unwrap();
        let scores = idx.scores("b d");
        assert_eq!(top_k_indices(&scores, 1), vec![1]);
    }

    #[test]
    fn exact_score_matches_formula() {
        // Hand evaluation for ["a b c","b c d","x y z"], query "b d", doc 1, k1=1.5, b=0.75.
        // All docs have length 3 so the length norm is 1: tf part = 2.5/(1+1.5) = 1.
        // idf(b) = ln((3-2+0.5)/(2+0.5)+1) = ln(1.6); idf(d) = ln((3-1+0.5)/(1+0.5)+1) = ln(8/3).
        let expected = 1.6f64.ln() + (8.0f64 / 3.0).ln();
        let idx = Bm25Index::build(&["a b c", "b c d", "x y z"], Bm25Params::default()).unwrap();
        assert!((idx.score("b d", 1).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 1.4508328822574619).abs() < 1e-12);
    }

    #[test]
    fn reduce_keeps_all_when_k_large() {
        let p = post(&["first", "second", "third"], "second");
        let r = reduce_context(&p, DEFAULT_TOP_K, Bm25Params::default()).unwrap();
        assert_eq!(r.kept_indices, vec![0, 1, 2]);
        assert_eq!(r.paragraphs, p.paragraphs);
        assert!(r.is_full(3));
    }

    #[test]
    fn reduce_restores_document_order() {
        let p = post(&["cats", "dogs bark loudly", "nothing", "dogs and cats"], "dogs cats");
        let r = reduce_context(&p, 2, Bm25Params::default()).unwrap();
        // Scores: doc 3 > doc 0 (short) > doc 1; kept set re-sorted.
        assert_eq!(r.kept_indices, vec![0, 3]);
        assert_eq!(r.paragraphs, vec!["cats", "dogs and cats"]);
        assert_eq!(r.to_json_line(), r#"{"post_id":"x","kept_indices":[0,3],"k":2}"#);
    }

    #[test]
    fn ties_prefer_lower_index() {
        assert_eq!(top_k_indices(&[1.0, 2.0, 2.0, 2.0], 2), vec![1, 2]);
        let p = post(&["zz", "yy", "xx"], "nothing matches");
        assert_eq!(reduce_context(&p, 2, Bm25Params::default()).unwrap().kept_indices, vec![0, 1]);
    }

    #[test]
    fn k_zero_rejected() {
        assert!(reduce_context(&post(&["a"], "a"), 0, Bm25Params::default()).is_err());
    }

    #[test]
    fn tokenless_post_keeps_prefix() {
        let p = post(&["...", "!!", "??"], "anything");
        assert_eq!(reduce_context(&p, 2, Bm25Params::default()).unwrap().kept_indices, vec![0, 1]);
    }
}

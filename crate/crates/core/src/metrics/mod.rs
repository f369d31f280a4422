//! Evaluation metrics: BLEU-4, reduced METEOR, accuracy and macro-F1.
//!
//! Text metrics tokenize with [`metric_tokens`], the lowercase split shared
//! with the reference tokenizer, and report on a 0–100 scale.

mod bleu;
mod classification;
mod meteor;
mod report;

pub use bleu::{bleu4, corpus_bleu4, ngram_counts, BLEU_ORDER};
pub use classification::{accuracy, confusion_matrix, macro_f1, MacroF1};
pub use meteor::{align, meteor_reduced, meteor_tokens, stem, Alignment, METEOR_ALPHA, METEOR_BETA, METEOR_GAMMA};
pub use report::{
    evaluate_split, parse_predictions, BleuMode, EvalOptions, EvalReport, EvalTask, PredictionLine, TTestSummary,
};

use crate::qa_prep::ReferenceTokenizer;

/// Lowercased token surfaces.
pub fn metric_tokens(text: &str) -> Vec<String> {
    ReferenceTokenizer::split(text).into_iter().map(|(s, _, _)| s).collect()
}

//! Logit providers.
//!
//! Every neural model sits behind [`Scorer`]: windows in, start/end logits
//! out, plus three class logits for the classification path. Three
//! providers ship here: a deterministic hash-based [`StubScorer`], a
//! [`FileScorer`] replaying precomputed JSONL, and a [`BridgeScorer`] that
//! talks newline-delimited JSON to an external process.
//!
//! Outputs are always checked with [`score_window`] / [`classify`] before
//! they reach span selection, so a provider returning the wrong shape fails
//! fast instead of producing fabricated spans.

mod bridge;
mod file;
mod stub;

use std::time::Duration;

pub use bridge::{BridgeScorer, DEFAULT_BRIDGE_TIMEOUT};
pub use file::{write_sheets, ClassificationLogits, FileScorer};
pub use stub::StubScorer;

use crate::corpus::SpoilerType;
use crate::error::{Error, Result};
use crate::mtl_math::softmax;
use crate::qa_prep::{Task, Window};
use crate::span_select::LogitSheet;

#[derive(Debug, thiserror::Error)]
pub enum ScorerError {
    #[error("scorer contract violated: {0}")]
    Contract(String),
    #[error("no logits for window {post_id}/{task}/{window_index}")]
    UnknownWindow { post_id: String, task: Task, window_index: usize },
    #[error("no classification logits for post {0}")]
    UnknownPost(String),
    #[error("logit file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("bridge transport failure: {0}")]
    Transport(String),
    #[error("bridge did not answer within {0:?}")]
    Timeout(Duration),
    #[error("bridge reported an error: {0}")]
    Remote(String),
}

pub trait Scorer: Send + Sync {
    /// Raw start/end logits for one window.
    fn window_logits(&self, window: &Window) -> Result<LogitSheet, ScorerError>;

    /// Three raw class logits (phrase, passage, multi) for a formatted input.
    fn class_logits(&self, post_id: &str, input: &str) -> Result<Vec<f64>, ScorerError>;
}

/// Score a window and check the result against the window before returning it.
pub fn score_window(scorer: &dyn Scorer, window: &Window) -> Result<LogitSheet, ScorerError> {
    let sheet = scorer.window_logits(window)?;
    sheet.check_against(window).map_err(ScorerError::Contract)?;
    Ok(sheet)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub probabilities: [f64; 3],
    pub label: SpoilerType,
}

/// Softmax over the three class logits; argmax with ties to the lower class code.
pub fn classify_from_logits(logits: &[f64]) -> Result<Classification> {
    if logits.len() != 3 {
        return Err(ScorerError::Contract(format!("expected 3 class logits, got {}", logits.len())).into());
    }
    if logits.iter().any(|x| !x.is_finite()) {
        return Err(ScorerError::Contract("non-finite class logits".into()).into());
    }
    let p = softmax(logits)?;
    let mut best = 0;
    for k in 1..3 {
        if logits[k] > logits[best] {
            best = k;
        }
    }
    Ok(Classification {
        probabilities: [p[0], p[1], p[2]],
        label: SpoilerType::from_code(best).expect("three classes"),
    })
}

pub fn classify(scorer: &dyn Scorer, post_id: &str, input: &str) -> Result<Classification> {
    let logits = scorer.class_logits(post_id, input).map_err(Error::from)?;
    classify_from_logits(&logits)
}

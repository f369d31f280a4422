//! Clickbait spoiling pipeline toolkit.
//!
//! The crate is model-agnostic: neural encoders live behind the [`scorer`]
//! contract, and everything around them (corpus ingestion, BM25 context
//! reduction, windowed tokenization, span selection, training-side math and
//! evaluation metrics) is implemented here.
//!
//! Character offsets are Unicode scalar-value offsets throughout, never byte
//! offsets. See [`text`] for the conversion helpers.

pub mod corpus;
pub mod error;
pub mod metrics;
pub mod mtl_math;
pub mod qa_prep;
pub mod retrieval;
pub mod scorer;
pub mod span_select;
pub mod text;

pub use corpus::{ClickbaitPost, CorpusSplit, SplitName, SpoilerPosition, SpoilerType};
pub use error::{Error, Result};
pub use qa_prep::{ReferenceTokenizer, Task, Tokenizer, Window};
pub use retrieval::{Bm25Index, Bm25Params, ReducedContext};
pub use span_select::{LogitSheet, SpanPrediction};

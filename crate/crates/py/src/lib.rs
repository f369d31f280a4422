//! Python bindings: corpus loading, BM25 reduction, windowing, span
//! selection, metrics and the training-side math.

use std::collections::BTreeMap;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use spoilkit_core::corpus::{self, format_classification_input, ClickbaitPost, SpoilerPosition};
use spoilkit_core::metrics;
use spoilkit_core::mtl_math::{self, Alternative, LossPair, TrainSchedule};
use spoilkit_core::qa_prep::{self, ReferenceTokenizer, Task, Window};
use spoilkit_core::retrieval::{self, Bm25Index, Bm25Params};
use spoilkit_core::scorer::{Scorer, StubScorer};
use spoilkit_core::span_select::{self, LogitSheet};
use spoilkit_core::{Error, SplitName, SpoilerType};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Scorer(_) => PyRuntimeError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(to_py)
}

fn types(labels: &[String]) -> PyResult<Vec<SpoilerType>> {
    labels.iter().map(|l| parse(l)).collect()
}

/// One corpus record.
#[pyclass(name = "Post", module = "spoilkit", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyPost {
    inner: ClickbaitPost,
}

#[pymethods]
impl PyPost {
    #[new]
    #[pyo3(signature = (id, title, paragraphs, spoilers=Vec::new(), positions=Vec::new(), spoiler_type=None, aux_question=None))]
    fn new(
        id: String,
        title: String,
        paragraphs: Vec<String>,
        spoilers: Vec<String>,
        positions: Vec<((usize, usize), (usize, usize))>,
        spoiler_type: Option<String>,
        aux_question: Option<String>,
    ) -> PyResult<Self> {
        let inner = ClickbaitPost {
            id,
            title_text: title,
            paragraphs,
            gold_spoilers: spoilers,
            positions: positions.into_iter().map(|((sp, sc), (ep, ec))| SpoilerPosition::new(sp, sc, ep, ec)).collect(),
            spoiler_type: spoiler_type.as_deref().map(parse).transpose()?,
            aux_question,
        };
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn id(&self) -> String {
        self.inner.id.clone()
    }

    #[getter]
    fn title(&self) -> String {
        self.inner.title_text.clone()
    }

    #[getter]
    fn paragraphs(&self) -> Vec<String> {
        self.inner.paragraphs.clone()
    }

    #[getter]
    fn spoilers(&self) -> Vec<String> {
        self.inner.gold_spoilers.clone()
    }

    #[getter]
    fn positions(&self) -> Vec<((usize, usize), (usize, usize))> {
        self.inner
            .positions
            .iter()
            .map(|p| ((p.start_paragraph, p.start_char), (p.end_paragraph, p.end_char)))
            .collect()
    }

    #[getter]
    fn spoiler_type(&self) -> Option<&'static str> {
        self.inner.spoiler_type.map(SpoilerType::as_str)
    }

    #[getter]
    fn aux_question(&self) -> Option<String> {
        self.inner.aux_question.clone()
    }

    /// Canonical JSONL line.
    fn to_json(&self) -> String {
        self.inner.to_canonical_json()
    }

    /// `title [SEP] paragraphs` input of the type classifier.
    fn classification_input(&self) -> String {
        format_classification_input(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "Post(id={:?}, type={:?}, paragraphs={})",
            self.inner.id,
            self.spoiler_type(),
            self.inner.paragraphs.len()
        )
    }
}

/// One tokenized question/context window.
#[pyclass(name = "Window", module = "spoilkit", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyWindow {
    inner: Window,
}

#[pymethods]
impl PyWindow {
    #[getter]
    fn post_id(&self) -> String {
        self.inner.post_id.clone()
    }

    #[getter]
    fn task(&self) -> &'static str {
        self.inner.task.as_str()
    }

    #[getter]
    fn window_index(&self) -> usize {
        self.inner.window_index
    }

    #[getter]
    fn token_ids(&self) -> Vec<u32> {
        self.inner.token_ids.clone()
    }

    /// Char offsets into the context; None for question and special tokens.
    #[getter]
    fn offsets(&self) -> Vec<Option<(usize, usize)>> {
        self.inner.offsets.clone()
    }

    #[getter]
    fn context_tokens(&self) -> (usize, usize) {
        self.inner.context_tokens
    }

    #[getter]
    fn context_char_span(&self) -> (usize, usize) {
        self.inner.context_char_span
    }

    #[getter]
    fn answer_span(&self) -> Option<(usize, usize)> {
        self.inner.answer_span
    }

    #[getter]
    fn is_no_answer(&self) -> bool {
        self.inner.is_no_answer
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn to_json(&self) -> String {
        self.inner.to_json_line()
    }

    fn __repr__(&self) -> String {
        format!(
            "Window(post_id={:?}, task={}, index={}, tokens={})",
            self.inner.post_id,
            self.inner.task,
            self.inner.window_index,
            self.inner.len()
        )
    }
}

#[pyfunction]
#[pyo3(signature = (path, split="validation"))]
fn load_corpus(path: &str, split: &str) -> PyResult<Vec<PyPost>> {
    let split: SplitName = parse(split)?;
    let s = corpus::load_corpus(path, split).map_err(to_py)?;
    Ok(s.posts.into_iter().map(|inner| PyPost { inner }).collect())
}

#[pyfunction]
#[pyo3(signature = (text, split="validation"))]
fn parse_corpus(text: &str, split: &str) -> PyResult<Vec<PyPost>> {
    let split: SplitName = parse(split)?;
    let s = corpus::parse_corpus(std::io::Cursor::new(text), split).map_err(to_py)?;
    Ok(s.posts.into_iter().map(|inner| PyPost { inner }).collect())
}

#[pyfunction]
#[pyo3(signature = (paragraphs, query, k1=1.5, b=0.75))]
fn bm25_scores(paragraphs: Vec<String>, query: &str, k1: f64, b: f64) -> PyResult<Vec<f64>> {
    let index = Bm25Index::build(&paragraphs, Bm25Params { k1, b }).map_err(to_py)?;
    Ok(index.scores(query))
}

/// Indices of the paragraphs kept for `post`, in document order.
#[pyfunction]
#[pyo3(signature = (post, k=retrieval::DEFAULT_TOP_K))]
fn reduce_context(post: &PyPost, k: usize) -> PyResult<Vec<usize>> {
    Ok(retrieval::reduce_context(&post.inner, k, Bm25Params::default()).map_err(to_py)?.kept_indices)
}

#[pyfunction]
#[pyo3(signature = (question, context, max_len=qa_prep::DEFAULT_MAX_LEN, stride=qa_prep::DEFAULT_STRIDE, post_id="p", task="orig"))]
fn make_windows(
    question: &str,
    context: &str,
    max_len: usize,
    stride: usize,
    post_id: &str,
    task: &str,
) -> PyResult<Vec<PyWindow>> {
    let task: Task = parse(task)?;
    let windows =
        qa_prep::make_windows(&ReferenceTokenizer, post_id, task, question, context, max_len, stride).map_err(to_py)?;
    Ok(windows.into_iter().map(|inner| PyWindow { inner }).collect())
}

/// Deterministic stub logits `(start, end)` for a window.
#[pyfunction]
#[pyo3(signature = (window, seed=0))]
fn stub_logits(window: &PyWindow, seed: u64) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let sheet = StubScorer::new(seed).window_logits(&window.inner).map_err(|e| to_py(e.into()))?;
    Ok((sheet.start_logits, sheet.end_logits))
}

/// Best span of one window as `(start_token, end_token, text, score)`; `(0, 0, "", _)` is no answer.
#[pyfunction]
#[pyo3(signature = (window, context, start_logits, end_logits, max_answer_len=span_select::PHRASE_MAX_ANSWER_LEN))]
fn best_span(
    window: &PyWindow,
    context: &str,
    start_logits: Vec<f64>,
    end_logits: Vec<f64>,
    max_answer_len: usize,
) -> PyResult<(usize, usize, String, f64)> {
    let w = &window.inner;
    let sheet =
        LogitSheet { post_id: w.post_id.clone(), task: w.task, window_index: w.window_index, start_logits, end_logits };
    let p = span_select::best_span_in_window(&sheet, w, context, max_answer_len).map_err(to_py)?;
    Ok((p.start_token, p.end_token, p.text, p.score))
}

#[pyfunction]
fn bleu4(hypothesis: &str, reference: &str) -> f64 {
    metrics::bleu4(hypothesis, reference)
}

#[pyfunction]
fn corpus_bleu4(pairs: Vec<(String, String)>) -> f64 {
    metrics::corpus_bleu4(pairs.iter().map(|(h, r)| (h.as_str(), r.as_str())))
}

#[pyfunction]
fn meteor_reduced(hypothesis: &str, reference: &str) -> f64 {
    metrics::meteor_reduced(hypothesis, reference)
}

#[pyfunction]
fn accuracy(predicted: Vec<String>, gold: Vec<String>) -> PyResult<f64> {
    metrics::accuracy(&types(&predicted)?, &types(&gold)?).map_err(to_py)
}

/// `(macro_f1, {type: f1})`.
#[pyfunction]
fn macro_f1(predicted: Vec<String>, gold: Vec<String>) -> PyResult<(f64, BTreeMap<String, f64>)> {
    let m = metrics::macro_f1(&types(&predicted)?, &types(&gold)?).map_err(to_py)?;
    Ok((m.macro_f1, m.per_class.into_iter().map(|(t, f)| (t.as_str().to_string(), f)).collect()))
}

#[pyfunction]
fn softmax(logits: Vec<f64>) -> PyResult<Vec<f64>> {
    mtl_math::softmax(&logits).map_err(to_py)
}

#[pyfunction]
fn cross_entropy(target: Vec<f64>, predicted: Vec<f64>) -> PyResult<f64> {
    mtl_math::cross_entropy(&target, &predicted).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (l_orig, l_aux, alpha=mtl_math::DEFAULT_ALPHA))]
fn combined_loss(l_orig: f64, l_aux: f64, alpha: f64) -> PyResult<f64> {
    Ok(mtl_math::combined_loss(LossPair::new(l_orig, l_aux, alpha).map_err(to_py)?))
}

#[pyfunction]
#[pyo3(signature = (step, n_train, batch_size=mtl_math::DEFAULT_BATCH_SIZE, epochs=mtl_math::DEFAULT_EPOCHS, base_lr=mtl_math::DEFAULT_BASE_LR))]
fn linear_lr(step: usize, n_train: usize, batch_size: usize, epochs: usize, base_lr: f64) -> PyResult<f64> {
    let s = TrainSchedule::new(n_train, batch_size, epochs, base_lr).map_err(to_py)?;
    mtl_math::linear_lr(&s, step).map_err(to_py)
}

#[pyfunction]
fn select_checkpoint(val_losses: Vec<f64>) -> PyResult<usize> {
    mtl_math::select_checkpoint(&val_losses).map_err(to_py)
}

/// `(t, p, df)` of a one-sample t-test; alternative is two-sided, greater or less.
#[pyfunction]
#[pyo3(signature = (samples, mu0, alternative="two-sided"))]
fn one_sample_ttest(samples: Vec<f64>, mu0: f64, alternative: &str) -> PyResult<(f64, f64, usize)> {
    let alt = match alternative {
        "two-sided" => Alternative::TwoSided,
        "greater" => Alternative::Greater,
        "less" => Alternative::Less,
        other => return Err(PyValueError::new_err(format!("unknown alternative {other:?}"))),
    };
    let r = mtl_math::one_sample_ttest(&samples, mu0, alt).map_err(to_py)?;
    Ok((r.t_statistic, r.p_value, r.df))
}

#[pymodule]
fn spoilkit(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyPost>()?;
    m.add_class::<PyWindow>()?;
    m.add_function(wrap_pyfunction!(load_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(parse_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(bm25_scores, m)?)?;
    m.add_function(wrap_pyfunction!(reduce_context, m)?)?;
    m.add_function(wrap_pyfunction!(make_windows, m)?)?;
    m.add_function(wrap_pyfunction!(stub_logits, m)?)?;
    m.add_function(wrap_pyfunction!(best_span, m)?)?;
    m.add_function(wrap_pyfunction!(bleu4, m)?)?;
    m.add_function(wrap_pyfunction!(corpus_bleu4, m)?)?;
    m.add_function(wrap_pyfunction!(meteor_reduced, m)?)?;
    m.add_function(wrap_pyfunction!(accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(macro_f1, m)?)?;
    m.add_function(wrap_pyfunction!(softmax, m)?)?;
    m.add_function(wrap_pyfunction!(cross_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(combined_loss, m)?)?;
    m.add_function(wrap_pyfunction!(linear_lr, m)?)?;
    m.add_function(wrap_pyfunction!(select_checkpoint, m)?)?;
    m.add_function(wrap_pyfunction!(one_sample_ttest, m)?)?;
    Ok(())
}

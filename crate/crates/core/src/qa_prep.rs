//! Tokenization with character offsets, sliding-window construction and
//! gold-answer alignment for extractive QA.
//!
//! A window is laid out as `[CLS] question [SEP] context-slice [SEP]` and
//! never exceeds `max_len` ids. Consecutive windows share exactly `stride`
//! context tokens. Offsets are char offsets into the flattened context
//! string; question and special tokens carry `None`.

use std::collections::HashMap;
use std::fmt;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{ClickbaitPost, SpoilerPosition, SpoilerType};
use crate::error::{Error, Result};
use crate::retrieval::ReducedContext;
use crate::text::{char_len, CharIndex};

pub const DEFAULT_MAX_LEN: usize = 384;
pub const DEFAULT_STRIDE: usize = 128;
pub const DEFAULT_PASSAGE_THRESHOLD: f64 = 0.5;
/// Token budget of the classification path.
pub const CLASSIFICATION_MAX_LEN: usize = 512;

/// A token and the char range of the source text it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub id: u32,
    pub text: String,
    pub start: usize,
    pub end: usize,
}

pub trait Tokenizer: Send + Sync {
    /// Tokens in order with non-overlapping, non-decreasing char offsets.
    fn tokenize(&self, text: &str) -> Vec<Token>;
    fn cls_id(&self) -> u32;
    fn sep_id(&self) -> u32;
}

/// Lowercasing word/punctuation splitter.
///
/// Words are maximal runs of alphanumeric chars; every other
/// non-whitespace char is a token of its own. Ids are a stable hash of the
/// lowercased surface form.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReferenceTokenizer;

pub const PAD_ID: u32 = 0;
pub const CLS_ID: u32 = 1;
pub const SEP_ID: u32 = 2;
const FIRST_WORD_ID: u32 = 3;

fn fnv1a(text: &str) -> u32 {
    let mut h: u32 = 0x811c_9dc5;
    for b in text.bytes() {
        h ^= b as u32;
        h = h.wrapping_mul(0x0100_0193);
    }
    h
}

impl ReferenceTokenizer {
    pub fn token_id(surface: &str) -> u32 {
        FIRST_WORD_ID + fnv1a(surface) % (u32::MAX - FIRST_WORD_ID)
    }

    /// Raw (surface, start, end) pieces without ids.
    pub fn split(text: &str) -> Vec<(String, usize, usize)> {
        let mut out = Vec::new();
        let mut word_start: Option<(usize, usize)> = None; // (char, byte)
        let flush = |ws: &mut Option<(usize, usize)>, end_char: usize, end_byte: usize, out: &mut Vec<_>| {
            if let Some((sc, sb)) = ws.take() {
                out.push((text[sb..end_byte].to_lowercase(), sc, end_char));
            }
        };
        let mut n_chars = 0;
        for (ci, (bi, c)) in text.char_indices().enumerate() {
            n_chars = ci + 1;
            if c.is_alphanumeric() {
                if word_start.is_none() {
                    word_start = Some((ci, bi));
                }
                continue;
            }
            flush(&mut word_start, ci, bi, &mut out);
            if !c.is_whitespace() {
                out.push((c.to_lowercase().collect(), ci, ci + 1));
            }
        }
        flush(&mut word_start, n_chars, text.len(), &mut out);
        out
    }
}

impl Tokenizer for ReferenceTokenizer {
    fn tokenize(&self, text: &str) -> Vec<Token> {
        Self::split(text)
            .into_iter()
            .map(|(text, start, end)| Token { id: Self::token_id(&text), text, start, end })
            .collect()
    }

    fn cls_id(&self) -> u32 {
        CLS_ID
    }

    fn sep_id(&self) -> u32 {
        SEP_ID
    }
}

/// Convenience wrapper over [`ReferenceTokenizer`].
pub fn tokenize_with_offsets(text: &str) -> Vec<(String, usize, usize)> {
    ReferenceTokenizer::split(text)
}

/// Subword tokenizer driven by a vocabulary file (one token per line, id =
/// line number). Pieces are found by greedy longest match inside each
/// reference-tokenizer word; continuation pieces use the `##` prefix. A word
/// that cannot be fully covered becomes a single `[UNK]`.
#[derive(Debug, Clone)]
pub struct VocabTokenizer {
    vocab: HashMap<String, u32>,
    cls: u32,
    sep: u32,
    unk: u32,
    max_piece_chars: usize,
}

impl VocabTokenizer {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_owned(), source })?;
        Self::from_tokens(text.lines().map(|l| l.trim_end_matches('\r')))
    }

    pub fn from_tokens<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let mut vocab = HashMap::new();
        for (i, t) in tokens.into_iter().enumerate() {
            vocab.entry(t.to_string()).or_insert(i as u32);
        }
        let special =
            |name: &str| vocab.get(name).copied().ok_or_else(|| Error::invalid(format!("vocabulary lacks {name}")));
        let (cls, sep, unk) = (special("[CLS]")?, special("[SEP]")?, special("[UNK]")?);
        let max_piece_chars = vocab.keys().map(|k| char_len(k.trim_start_matches("##"))).max().unwrap_or(1);
        Ok(Self { vocab, cls, sep, unk, max_piece_chars })
    }

    fn pieces(&self, word: &str, start: usize, end: usize, out: &mut Vec<Token>) {
        let chars: Vec<char> = word.chars().collect();
        // Lowercasing changed the length: offsets can't be split safely.
        if chars.len() != end - start {
            let id = self.vocab.get(word).copied().unwrap_or(self.unk);
            out.push(Token { id, text: word.to_string(), start, end });
            return;
        }
        let mut found = Vec::new();
        let mut pos = 0;
        while pos < chars.len() {
            let mut hit = None;
            let longest = (chars.len() - pos).min(self.max_piece_chars);
            for len in (1..=longest).rev() {
                let body: String = chars[pos..pos + len].iter().collect();
                let piece = if pos == 0 { body } else { format!("##{body}") };
                if let Some(&id) = self.vocab.get(&piece) {
                    hit = Some((id, piece, len));
                    break;
                }
            }
            match hit {
                Some((id, piece, len)) => {
                    found.push(Token { id, text: piece, start: start + pos, end: start + pos + len });
                    pos += len;
                }
                None => {
                    out.push(Token { id: self.unk, text: "[UNK]".into(), start, end });
                    return;
                }
            }
        }
        out.extend(found);
    }
}

impl Tokenizer for VocabTokenizer {
    fn tokenize(&self, text: &str) -> Vec<Token> {
        let mut out = Vec::new();
        for (word, start, end) in ReferenceTokenizer::split(text) {
            self.pieces(&word, start, end, &mut out);
        }
        out
    }

    fn cls_id(&self) -> u32 {
        self.cls
    }

    fn sep_id(&self) -> u32 {
        self.sep
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// Title text as the question (main task).
    Orig,
    /// Generated auxiliary question.
    Aux,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Orig => "orig",
            Task::Aux => "aux",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "orig" => Ok(Task::Orig),
            "aux" => Ok(Task::Aux),
            other => Err(Error::invalid(format!("unknown task {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignedAnswer {
    pub start_token: usize,
    pub end_token: usize,
}

/// One tokenized QA window.
///
/// `answer_span` is `None` for unlabeled windows. A no-answer window has
/// `is_no_answer` set and `answer_span == Some((0, 0))`, the CLS position.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub post_id: String,
    pub task: Task,
    pub window_index: usize,
    pub token_ids: Vec<u32>,
    pub offsets: Vec<Option<(usize, usize)>>,
    /// Half-open token index range of the context slice.
    pub context_tokens: (usize, usize),
    pub context_char_span: (usize, usize),
    pub answer_span: Option<(usize, usize)>,
    pub is_no_answer: bool,
}

#[derive(Serialize)]
struct WindowRecord<'a> {
    post_id: &'a str,
    task: Task,
    window_index: usize,
    token_count: usize,
    context_char_span: (usize, usize),
    answer_span: Option<(usize, usize)>,
    is_no_answer: bool,
}

impl Window {
    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }

    pub fn context_range(&self) -> Range<usize> {
        self.context_tokens.0..self.context_tokens.1
    }

    pub fn is_context_token(&self, i: usize) -> bool {
        self.context_range().contains(&i)
    }

    pub fn set_answer(&mut self, answer: Option<AlignedAnswer>) {
        match answer {
            Some(a) => {
                self.answer_span = Some((a.start_token, a.end_token));
                self.is_no_answer = false;
            }
            None => {
                self.answer_span = Some((0, 0));
                self.is_no_answer = true;
            }
        }
    }

    /// Audit line for the bridge and for inspection.
    pub fn to_json_line(&self) -> String {
        let rec = WindowRecord {
            post_id: &self.post_id,
            task: self.task,
            window_index: self.window_index,
            token_count: self.len(),
            context_char_span: self.context_char_span,
            answer_span: self.answer_span,
            is_no_answer: self.is_no_answer,
        };
        serde_json::to_string(&rec).expect("serializable")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowConfig {
    pub max_len: usize,
    pub stride: usize,
    /// Minimum fraction of a passage answer that must fall inside a window.
    pub passage_threshold: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self { max_len: DEFAULT_MAX_LEN, stride: DEFAULT_STRIDE, passage_threshold: DEFAULT_PASSAGE_THRESHOLD }
    }
}

/// Context token ranges `[start, end)` of each window, tiled by advancing
/// `capacity - stride` tokens until the end is reached.
pub fn window_starts(n_tokens: usize, capacity: usize, stride: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    loop {
        let end = (start + capacity).min(n_tokens);
        out.push((start, end));
        if end >= n_tokens {
            return out;
        }
        start += capacity - stride;
    }
}

/// Build the overlapping windows for one (question, context) pair.
pub fn make_windows(
    tokenizer: &dyn Tokenizer,
    post_id: &str,
    task: Task,
    question: &str,
    context: &str,
    max_len: usize,
    stride: usize,
) -> Result<Vec<Window>> {
    let question_tokens = tokenizer.tokenize(question);
    let needed = question_tokens.len() + 3;
    if max_len <= needed {
        return Err(Error::QuestionTooLong { needed: needed + 1, max_len });
    }
    let capacity = max_len - needed;
    if stride == 0 || stride >= capacity {
        return Err(Error::invalid(format!("stride {stride} must lie in 1..{capacity}")));
    }
    let context_tokens = tokenizer.tokenize(context);
    let context_len = char_len(context);
    let ranges = window_starts(context_tokens.len(), capacity, stride);
    let last = ranges.len() - 1;

    let mut head_ids = Vec::with_capacity(needed - 1);
    head_ids.push(tokenizer.cls_id());
    head_ids.extend(question_tokens.iter().map(|t| t.id));
    head_ids.push(tokenizer.sep_id());

    let windows = ranges
        .into_iter()
        .enumerate()
        .map(|(window_index, (s, e))| {
            let slice = &context_tokens[s..e];
            let mut token_ids = head_ids.clone();
            let mut offsets = vec![None; head_ids.len()];
            token_ids.extend(slice.iter().map(|t| t.id));
            offsets.extend(slice.iter().map(|t| Some((t.start, t.end))));
            token_ids.push(tokenizer.sep_id());
            offsets.push(None);
            let span_start = if window_index == 0 { 0 } else { slice.first().map_or(0, |t| t.start) };
            let span_end = if window_index == last { context_len } else { slice.last().map_or(0, |t| t.end) };
            Window {
                post_id: post_id.to_string(),
                task,
                window_index,
                token_ids,
                offsets,
                context_tokens: (head_ids.len(), head_ids.len() + slice.len()),
                context_char_span: (span_start, span_end),
                answer_span: None,
                is_no_answer: false,
            }
        })
        .collect();
    Ok(windows)
}

/// Smallest run of context tokens whose offsets cover the char span.
pub fn token_cover(window: &Window, start: usize, end: usize) -> Option<AlignedAnswer> {
    let mut hit = window.context_range().filter(|&i| {
        let (ts, te) = window.offsets[i].expect("context token has offsets");
        te > start && ts < end
    });
    let first = hit.next()?;
    let last = hit.next_back().unwrap_or(first);
    Some(AlignedAnswer { start_token: first, end_token: last })
}

/// Align a gold answer char span (in the flattened context) to this window.
///
/// Phrase and multi answers must lie fully inside the window's char span.
/// Passage answers are clamped to the window when at least
/// `passage_threshold` of their chars fall inside it. `None` is no-answer.
pub fn align_answer(
    window: &Window,
    answer: (usize, usize),
    spoiler_type: SpoilerType,
    passage_threshold: f64,
) -> Option<AlignedAnswer> {
    let (a_start, a_end) = answer;
    if a_end <= a_start {
        return None;
    }
    let (w_start, w_end) = window.context_char_span;
    let (start, end) = match spoiler_type {
        SpoilerType::Phrase | SpoilerType::Multi => {
            if a_start < w_start || a_end > w_end {
                return None;
            }
            (a_start, a_end)
        }
        SpoilerType::Passage => {
            let lo = a_start.max(w_start);
            let hi = a_end.min(w_end);
            let inside = hi.saturating_sub(lo);
            if inside == 0 || (inside as f64) < passage_threshold * (a_end - a_start) as f64 {
                return None;
            }
            (lo, hi)
        }
    };
    token_cover(window, start, end)
}

/// Paragraph `paragraph` occupies flat chars `[start, start + len)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParagraphSegment {
    pub paragraph: usize,
    pub start: usize,
    pub len: usize,
}

/// Paragraphs joined by single spaces, with the map back to paragraph coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatContext {
    pub text: String,
    pub segments: Vec<ParagraphSegment>,
}

impl FlatContext {
    pub fn new(paragraphs: &[String], indices: &[usize]) -> Self {
        let mut text = String::new();
        let mut segments = Vec::with_capacity(indices.len());
        let mut cursor = 0;
        for (n, &i) in indices.iter().enumerate() {
            if n > 0 {
                text.push(' ');
                cursor += 1;
            }
            let len = char_len(&paragraphs[i]);
            text.push_str(&paragraphs[i]);
            segments.push(ParagraphSegment { paragraph: i, start: cursor, len });
            cursor += len;
        }
        Self { text, segments }
    }

    pub fn full(paragraphs: &[String]) -> Self {
        Self::new(paragraphs, &(0..paragraphs.len()).collect::<Vec<_>>())
    }

    /// Flat char offset of (paragraph, char), if that paragraph is present.
    pub fn flat_offset(&self, paragraph: usize, char_offset: usize) -> Option<usize> {
        let seg = self.segments.iter().find(|s| s.paragraph == paragraph)?;
        (char_offset <= seg.len).then_some(seg.start + char_offset)
    }

    /// Flat `[start, end)` of a gold position. Requires every paragraph the
    /// span touches to be present and adjacent in this context.
    pub fn rebase(&self, pos: &SpoilerPosition) -> Option<(usize, usize)> {
        let first = self.segments.iter().position(|s| s.paragraph == pos.start_paragraph)?;
        let count = pos.end_paragraph.checked_sub(pos.start_paragraph)? + 1;
        let run = self.segments.get(first..first + count)?;
        if run.iter().enumerate().any(|(k, s)| s.paragraph != pos.start_paragraph + k) {
            return None;
        }
        let (s, e) = (run[0], run[count - 1]);
        if pos.start_char > s.len || pos.end_char > e.len {
            return None;
        }
        Some((s.start + pos.start_char, e.start + pos.end_char))
    }
}

/// Windows and context for one task of one post.
#[derive(Debug, Clone)]
pub struct TaskInput {
    pub task: Task,
    pub question: String,
    pub context: FlatContext,
    pub windows: Vec<Window>,
    /// Flat char spans of the gold spoilers that survive in this context.
    pub gold_spans: Vec<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct PreparedInputs {
    pub orig: TaskInput,
    pub aux: Option<TaskInput>,
}

fn task_input(
    post: &ClickbaitPost,
    task: Task,
    question: &str,
    context: FlatContext,
    cfg: &WindowConfig,
    tokenizer: &dyn Tokenizer,
) -> Result<TaskInput> {
    let mut windows = make_windows(tokenizer, &post.id, task, question, &context.text, cfg.max_len, cfg.stride)?;
    let gold_spans: Vec<(usize, usize)> = post.positions.iter().filter_map(|p| context.rebase(p)).collect();
    if let Some(kind) = post.spoiler_type {
        // Training labels follow the first surviving spoiler.
        let target = gold_spans.first().copied();
        for w in &mut windows {
            let aligned = target.and_then(|span| align_answer(w, span, kind, cfg.passage_threshold));
            w.set_answer(aligned);
        }
    }
    Ok(TaskInput { task, question: question.to_string(), context, windows, gold_spans })
}

/// Build both task streams for a post.
///
/// The orig task asks the title against the reduced context when one is
/// given, else the full paragraphs. The aux task always uses the full
/// paragraphs and is built only when `with_aux` is set.
pub fn prepare_task_inputs(
    post: &ClickbaitPost,
    reduced: Option<&ReducedContext>,
    cfg: &WindowConfig,
    tokenizer: &dyn Tokenizer,
    with_aux: bool,
) -> Result<PreparedInputs> {
    let orig_context = match reduced {
        Some(r) => {
            if r.post_id != post.id {
                return Err(Error::invalid(format!("reduced context for {} applied to {}", r.post_id, post.id)));
            }
            if r.kept_indices.iter().any(|&i| i >= post.paragraphs.len()) {
                return Err(Error::invalid(format!("reduced context for {} has out-of-range indices", post.id)));
            }
            FlatContext::new(&post.paragraphs, &r.kept_indices)
        }
        None => FlatContext::full(&post.paragraphs),
    };
    let orig = task_input(post, Task::Orig, &post.title_text, orig_context, cfg, tokenizer)?;
    let aux = if with_aux {
        let question = post.aux_question.as_deref().ok_or_else(|| Error::MissingAuxQuestion(post.id.clone()))?;
        Some(task_input(post, Task::Aux, question, FlatContext::full(&post.paragraphs), cfg, tokenizer)?)
    } else {
        None
    };
    Ok(PreparedInputs { orig, aux })
}

/// Head-truncate a classification input to `max_len` tokens including CLS and SEP.
pub fn truncate_for_classification(text: &str, tokenizer: &dyn Tokenizer, max_len: usize) -> String {
    let tokens = tokenizer.tokenize(text);
    let keep = max_len.saturating_sub(2);
    if tokens.len() <= keep {
        return text.to_string();
    }
    if keep == 0 {
        return String::new();
    }
    let end = tokens[keep - 1].end;
    CharIndex::new(text).slice(0, end).unwrap_or(text).to_string()
}

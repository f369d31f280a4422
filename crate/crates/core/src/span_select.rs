//! From start/end logits to a final spoiler span.
//!
//! Within a window the best span maximizes `start[i] + end[j]` over context
//! tokens with `i <= j` and a bounded length. Across windows the highest
//! score wins. The two tasks are reconciled by comparing each candidate's
//! combined negative log-likelihood `nll_orig + alpha * nll_aux`.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::corpus::SpoilerType;
use crate::error::{Error, Result};
use crate::mtl_math::log_softmax;
use crate::qa_prep::{Task, Window};
use crate::text::CharIndex;

pub const PHRASE_MAX_ANSWER_LEN: usize = 30;
pub const PASSAGE_MAX_ANSWER_LEN: usize = 150;
/// Spans emitted for a multi spoiler when the gold count is unknown.
pub const DEFAULT_MULTI_SPANS: usize = 3;

/// Per-type cap on answer length in tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaxAnswerLen {
    pub phrase: usize,
    pub passage: usize,
    pub multi: usize,
}

impl Default for MaxAnswerLen {
    fn default() -> Self {
        Self { phrase: PHRASE_MAX_ANSWER_LEN, passage: PASSAGE_MAX_ANSWER_LEN, multi: PHRASE_MAX_ANSWER_LEN }
    }
}

impl MaxAnswerLen {
    pub fn for_type(&self, t: SpoilerType) -> usize {
        match t {
            SpoilerType::Phrase => self.phrase,
            SpoilerType::Passage => self.passage,
            SpoilerType::Multi => self.multi,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitSheet {
    pub post_id: String,
    pub task: Task,
    pub window_index: usize,
    pub start_logits: Vec<f64>,
    pub end_logits: Vec<f64>,
}

impl LogitSheet {
    /// Shape and identity check against the window the sheet claims to score.
    pub fn check_against(&self, window: &Window) -> std::result::Result<(), String> {
        if self.post_id != window.post_id || self.task != window.task || self.window_index != window.window_index {
            return Err(format!(
                "sheet {}/{}/{} does not belong to window {}/{}/{}",
                self.post_id, self.task, self.window_index, window.post_id, window.task, window.window_index
            ));
        }
        let n = window.len();
        if self.start_logits.len() != n || self.end_logits.len() != n {
            return Err(format!(
                "logit lengths {}/{} do not match window length {n} ({}/{}/{})",
                self.start_logits.len(),
                self.end_logits.len(),
                self.post_id,
                self.task,
                self.window_index
            ));
        }
        if self.start_logits.iter().chain(&self.end_logits).any(|x| !x.is_finite()) {
            return Err(format!("non-finite logits ({}/{}/{})", self.post_id, self.task, self.window_index));
        }
        Ok(())
    }

    fn log_probs(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok((log_softmax(&self.start_logits)?, log_softmax(&self.end_logits)?))
    }

    /// `-log p_start(0) - log p_end(0)`, the CLS reading.
    pub fn no_answer_nll(&self) -> Result<f64> {
        let (ls, le) = self.log_probs()?;
        Ok(-ls[0] - le[0])
    }
}

/// A selected span. `(0, 0)` is the no-answer sentinel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanPrediction {
    pub post_id: String,
    pub task: Task,
    pub window_index: usize,
    pub start_token: usize,
    pub end_token: usize,
    pub score: f64,
    pub text: String,
    #[serde(skip)]
    pub nll: f64,
    /// Char span in the task's context; `None` for the sentinel.
    #[serde(skip)]
    pub char_span: Option<(usize, usize)>,
}

#[derive(Serialize)]
struct PredictionRecord<'a> {
    post_id: &'a str,
    text: &'a str,
    start_token: usize,
    end_token: usize,
    window_index: usize,
    task: Task,
    score: f64,
}

impl SpanPrediction {
    pub fn is_no_answer(&self) -> bool {
        self.start_token == 0 && self.end_token == 0
    }

    /// `{"post_id","text","start_token","end_token","window_index","task","score"}`.
    pub fn to_json_line(&self) -> String {
        let rec = PredictionRecord {
            post_id: &self.post_id,
            text: &self.text,
            start_token: self.start_token,
            end_token: self.end_token,
            window_index: self.window_index,
            task: self.task,
            score: self.score,
        };
        serde_json::to_string(&rec).expect("serializable")
    }
}

fn check_sheet(sheet: &LogitSheet, window: &Window) -> Result<()> {
    sheet.check_against(window).map_err(Error::InvalidInput)
}

/// Source text of a token span; the sentinel yields "".
pub fn recover_text(window: &Window, span: (usize, usize), context: &str) -> Result<String> {
    if span == (0, 0) {
        return Ok(String::new());
    }
    let (s, e) = span;
    if s > e || !window.is_context_token(s) || !window.is_context_token(e) {
        return Err(Error::invalid(format!("span {span:?} is not a context span of this window")));
    }
    let start = window.offsets[s].expect("context offset").0;
    let end = window.offsets[e].expect("context offset").1;
    CharIndex::new(context)
        .slice(start, end)
        .map(str::to_owned)
        .ok_or_else(|| Error::invalid(format!("offsets {start}..{end} outside context")))
}

fn char_span_of(window: &Window, s: usize, e: usize) -> (usize, usize) {
    (window.offsets[s].expect("context offset").0, window.offsets[e].expect("context offset").1)
}

fn sentinel(sheet: &LogitSheet, ls: &[f64], le: &[f64]) -> SpanPrediction {
    SpanPrediction {
        post_id: sheet.post_id.clone(),
        task: sheet.task,
        window_index: sheet.window_index,
        start_token: 0,
        end_token: 0,
        score: sheet.start_logits[0] + sheet.end_logits[0],
        text: String::new(),
        nll: -ls[0] - le[0],
        char_span: None,
    }
}

/// Highest-scoring valid span of one window; ties go to smaller start, then smaller end.
pub fn best_span_in_window(
    sheet: &LogitSheet,
    window: &Window,
    context: &str,
    max_answer_len: usize,
) -> Result<SpanPrediction> {
    check_sheet(sheet, window)?;
    if max_answer_len == 0 {
        return Err(Error::invalid("max_answer_len must be positive"));
    }
    let (ls, le) = sheet.log_probs()?;
    let range = window.context_range();
    let mut best: Option<(usize, usize, f64)> = None;
    for i in range.clone() {
        let hi = (i + max_answer_len).min(range.end);
        for j in i..hi {
            let s = sheet.start_logits[i] + sheet.end_logits[j];
            if best.is_none_or(|(_, _, b)| s > b) {
                best = Some((i, j, s));
            }
        }
    }
    let Some((i, j, score)) = best else {
        return Ok(sentinel(sheet, &ls, &le));
    };
    Ok(SpanPrediction {
        post_id: sheet.post_id.clone(),
        task: sheet.task,
        window_index: sheet.window_index,
        start_token: i,
        end_token: j,
        score,
        text: recover_text(window, (i, j), context)?,
        nll: -ls[i] - le[j],
        char_span: Some(char_span_of(window, i, j)),
    })
}

/// Most confident window: maximal score, real spans beat sentinels, ties to the lower window.
pub fn select_across_windows(preds: &[SpanPrediction]) -> Result<SpanPrediction> {
    let first = preds.first().ok_or_else(|| Error::invalid("no window predictions"))?;
    if let Some(p) = preds.iter().find(|p| p.post_id != first.post_id || p.task != first.task) {
        return Err(Error::invalid(format!(
            "mixed predictions: {}/{} and {}/{}",
            first.post_id, first.task, p.post_id, p.task
        )));
    }
    let key = |p: &SpanPrediction| (!p.is_no_answer(), p.score);
    let mut best = first;
    for p in &preds[1..] {
        let (pk, bk) = (key(p), key(best));
        let better =
            pk.0 && !bk.0 || pk.0 == bk.0 && (pk.1 > bk.1 || pk.1 == bk.1 && p.window_index < best.window_index);
        if better {
            best = p;
        }
    }
    Ok(best.clone())
}

/// One task's winning span with the window, sheet and context it came from.
#[derive(Debug, Clone, Copy)]
pub struct TaskEvidence<'a> {
    pub prediction: &'a SpanPrediction,
    pub window: &'a Window,
    pub sheet: &'a LogitSheet,
    pub context: &'a str,
}

impl TaskEvidence<'_> {
    fn check(&self) -> Result<()> {
        check_sheet(self.sheet, self.window)?;
        if self.prediction.window_index != self.window.window_index || self.prediction.task != self.window.task {
            return Err(Error::invalid("prediction does not come from the evidence window"));
        }
        Ok(())
    }

    /// Lowest NLL of any valid span in the evidence window whose text is exactly `text`.
    pub fn locate_nll(&self, text: &str, max_answer_len: usize) -> Result<Option<f64>> {
        if text.is_empty() {
            return Ok(None);
        }
        let (ls, le) = self.sheet.log_probs()?;
        let idx = CharIndex::new(self.context);
        let range = self.window.context_range();
        let offset = |i: usize| self.window.offsets[i].expect("context offset");
        let mut best: Option<f64> = None;
        let mut from = 0;
        while let Some(found) = self.context[from..].find(text) {
            let byte = from + found;
            let a = idx.char_of_byte(byte).expect("match starts on a char boundary");
            let b = a + text.chars().count();
            if let Some(i) = range.clone().find(|&i| offset(i).0 == a) {
                let hi = (i + max_answer_len).min(range.end);
                if let Some(j) = (i..hi).find(|&j| offset(j).1 == b) {
                    let nll = -ls[i] - le[j];
                    best = Some(best.map_or(nll, |x: f64| x.min(nll)));
                }
            }
            from = byte + self.context[byte..].chars().next().map_or(1, char::len_utf8);
        }
        Ok(best)
    }

    /// NLL of `text` under this task: located NLL, else the no-answer reading
    /// but never better than this task's own winner.
    pub fn text_nll(&self, text: &str, max_answer_len: usize) -> Result<f64> {
        if let Some(nll) = self.locate_nll(text, max_answer_len)? {
            return Ok(nll);
        }
        Ok(self.sheet.no_answer_nll()?.max(self.prediction.nll))
    }
}

/// Combined costs `(orig candidate, aux candidate)` under `nll_orig + alpha * nll_aux`.
pub fn combined_costs(
    orig: &TaskEvidence<'_>,
    aux: &TaskEvidence<'_>,
    alpha: f64,
    max_answer_len: usize,
) -> Result<(f64, f64)> {
    orig.check()?;
    aux.check()?;
    if orig.prediction.post_id != aux.prediction.post_id {
        return Err(Error::invalid("combine_tasks needs predictions for the same post"));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("alpha must be finite and non-negative, got {alpha}")));
    }
    let orig_cost = orig.prediction.nll + alpha * aux.text_nll(&orig.prediction.text, max_answer_len)?;
    let aux_cost = orig.text_nll(&aux.prediction.text, max_answer_len)? + alpha * aux.prediction.nll;
    Ok((orig_cost, aux_cost))
}

/// Pick between the two tasks' winners by lower combined cost; ties keep orig.
pub fn combine_tasks(
    orig: &TaskEvidence<'_>,
    aux: &TaskEvidence<'_>,
    alpha: f64,
    max_answer_len: usize,
) -> Result<SpanPrediction> {
    let (orig_cost, aux_cost) = combined_costs(orig, aux, alpha, max_answer_len)?;
    Ok(if aux_cost < orig_cost { aux.prediction.clone() } else { orig.prediction.clone() })
}

/// Up to `n` non-overlapping spans with distinct text, best score first.
///
/// Extractive stand-in for multi spoilers; `windows` and `sheets` must be parallel.
pub fn top_n_spans(
    windows: &[Window],
    sheets: &[LogitSheet],
    context: &str,
    n: usize,
    max_answer_len: usize,
) -> Result<Vec<SpanPrediction>> {
    if windows.len() != sheets.len() {
        return Err(Error::invalid("windows and sheets differ in length"));
    }
    if max_answer_len == 0 {
        return Err(Error::invalid("max_answer_len must be positive"));
    }
    let mut candidates = Vec::new();
    for (w, (window, sheet)) in windows.iter().zip(sheets).enumerate() {
        check_sheet(sheet, window)?;
        let range = window.context_range();
        for i in range.clone() {
            for j in i..(i + max_answer_len).min(range.end) {
                candidates.push((sheet.start_logits[i] + sheet.end_logits[j], w, i, j));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2, a.3).cmp(&(b.1, b.2, b.3))));
    let mut chosen: Vec<SpanPrediction> = Vec::new();
    let mut texts = HashSet::new();
    let mut log_probs = vec![None; sheets.len()];
    for (score, w, i, j) in candidates {
        if chosen.len() == n {
            break;
        }
        let (window, sheet) = (&windows[w], &sheets[w]);
        let span = char_span_of(window, i, j);
        let overlaps = chosen.iter().any(|c| c.char_span.is_some_and(|(a, b)| span.0 < b && a < span.1));
        if overlaps {
            continue;
        }
        let text = recover_text(window, (i, j), context)?;
        if !texts.insert(text.clone()) {
            continue;
        }
        if log_probs[w].is_none() {
            log_probs[w] = Some(sheet.log_probs()?);
        }
        let (ls, le) = log_probs[w].as_ref().expect("just filled");
        chosen.push(SpanPrediction {
            post_id: sheet.post_id.clone(),
            task: sheet.task,
            window_index: sheet.window_index,
            start_token: i,
            end_token: j,
            score,
            text,
            nll: -ls[i] - le[j],
            char_span: Some(span),
        });
    }
    Ok(chosen)
}

/// Collapse multi-span output into one record: the top span's coordinates,
/// texts joined by single spaces in document order.
pub fn join_spans(spans: &[SpanPrediction]) -> Option<SpanPrediction> {
    let top = spans.first()?.clone();
    let mut ordered: Vec<&SpanPrediction> = spans.iter().collect();
    ordered.sort_by_key(|s| s.char_span.map_or(usize::MAX, |c| c.0));
    let text = ordered.iter().map(|s| s.text.as_str()).collect::<Vec<_>>().join(" ");
    Some(SpanPrediction { text, ..top })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qa_prep::{make_windows, ReferenceTokenizer};

    const CONTEXT: &str = "the quick brown fox jumps over the lazy dog";

    fn window() -> Window {
        make_windows(&ReferenceTokenizer, "p", Task::Orig, "what", CONTEXT, 64, 8).unwrap().remove(0)
    }

    fn sheet(w: &Window, start: Vec<f64>, end: Vec<f64>) -> LogitSheet {
        LogitSheet {
            post_id: w.post_id.clone(),
            task: w.task,
            window_index: w.window_index,
            start_logits: start,
            end_logits: end,
        }
    }

    fn peaked(w: &Window, i: usize, j: usize) -> LogitSheet {
        let mut s = vec![-10.0; w.len()];
        let mut e = vec![-10.0; w.len()];
        s[i] = 5.0;
        e[j] = 5.0;
        sheet(w, s, e)
    }

    #[test]
    fn peaks_select_span() {
        let w = window();
        // layout: CLS what SEP the(3) quick(4) brown(5) fox(6) jumps(7) ...
        let p = best_span_in_window(&peaked(&w, 5, 7), &w, CONTEXT, 30).unwrap();
        assert_eq!((p.start_token, p.end_token), (5, 7));
        assert_eq!(p.text, "brown fox jumps");
        assert_eq!(p.score, 10.0);
        assert_eq!(p.char_span, Some((10, 25)));
    }

    #[test]
    fn inverted_peaks_never_yield_inverted_span() {
        let w = window();
        let mut s = vec![-10.0; w.len()];
        let mut e = vec![-10.0; w.len()];
        s[8] = 9.0; // start peak after
        e[4] = 9.0; // end peak
        s[3] = 1.0;
        let p = best_span_in_window(&sheet(&w, s, e), &w, CONTEXT, 30).unwrap();
        assert!(p.start_token <= p.end_token);
        assert_eq!((p.start_token, p.end_token), (3, 4));
    }

    #[test]
    fn special_tokens_never_selected() {
        let w = window();
        let mut s = vec![0.0; w.len()];
        let mut e = vec![0.0; w.len()];
        s[0] = 50.0;
        e[0] = 50.0;
        s[1] = 40.0;
        *e.last_mut().unwrap() = 40.0;
        let p = best_span_in_window(&sheet(&w, s, e), &w, CONTEXT, 30).unwrap();
        assert!(w.is_context_token(p.start_token) && w.is_context_token(p.end_token));
        assert_eq!((p.start_token, p.end_token), (3, 3));
    }

    #[test]
    fn empty_context_gives_sentinel() {
        let w = make_windows(&ReferenceTokenizer, "p", Task::Orig, "q", "", 16, 4).unwrap().remove(0);
        let p = best_span_in_window(&sheet(&w, vec![1.0; w.len()], vec![1.0; w.len()]), &w, "", 30).unwrap();
        assert!(p.is_no_answer());
        assert_eq!(p.text, "");
    }

    #[test]
    fn length_mismatch_rejected() {
        let w = window();
        assert!(best_span_in_window(&sheet(&w, vec![0.0; 3], vec![0.0; 3]), &w, CONTEXT, 30).is_err());
    }

    #[test]
    fn recover_text_cases() {
        let w = window();
        assert_eq!(recover_text(&w, (6, 6), CONTEXT).unwrap(), "fox");
        assert_eq!(recover_text(&w, (0, 0), CONTEXT).unwrap(), "");
        assert!(recover_text(&w, (1, 4), CONTEXT).is_err());
        assert!(recover_text(&w, (5, 4), CONTEXT).is_err());
    }

    fn pred(window_index: usize, score: f64, span: (usize, usize)) -> SpanPrediction {
        SpanPrediction {
            post_id: "p".into(),
            task: Task::Orig,
            window_index,
            start_token: span.0,
            end_token: span.1,
            score,
            text: String::new(),
            nll: 0.0,
            char_span: None,
        }
    }

    #[test]
    fn across_windows_rules() {
        let preds = vec![pred(0, 5.1, (3, 4)), pred(1, 7.3, (3, 3)), pred(2, 6.0, (5, 6))];
        assert_eq!(select_across_windows(&preds).unwrap().window_index, 1);
        let with_sentinel = vec![pred(0, 99.0, (0, 0)), pred(1, -3.0, (4, 4))];
        assert_eq!(select_across_windows(&with_sentinel).unwrap().window_index, 1);
        let all_sentinel = vec![pred(0, 1.0, (0, 0)), pred(1, 2.0, (0, 0))];
        let s = select_across_windows(&all_sentinel).unwrap();
        assert!(s.is_no_answer());
        let tied = vec![pred(2, 1.0, (3, 3)), pred(1, 1.0, (4, 4))];
        assert_eq!(select_across_windows(&tied).unwrap().window_index, 1);
        assert!(select_across_windows(&[]).is_err());
        let mut mixed = vec![pred(0, 1.0, (3, 3)), pred(1, 1.0, (3, 3))];
        mixed[1].task = Task::Aux;
        assert!(select_across_windows(&mixed).is_err());
    }

    #[test]
    fn identical_task_winners_keep_that_span() {
        let w = window();
        let mut aux_w = w.clone();
        aux_w.task = Task::Aux;
        let s_orig = peaked(&w, 5, 6);
        let s_aux = peaked(&aux_w, 5, 6);
        let p_orig = best_span_in_window(&s_orig, &w, CONTEXT, 30).unwrap();
        let p_aux = best_span_in_window(&s_aux, &aux_w, CONTEXT, 30).unwrap();
        let orig = TaskEvidence { prediction: &p_orig, window: &w, sheet: &s_orig, context: CONTEXT };
        let aux = TaskEvidence { prediction: &p_aux, window: &aux_w, sheet: &s_aux, context: CONTEXT };
        let chosen = combine_tasks(&orig, &aux, 0.5, 30).unwrap();
        assert_eq!(chosen.task, Task::Orig);
        assert_eq!(chosen.text, "brown fox");
    }

    #[test]
    fn locate_finds_repeated_text() {
        let w = window();
        let s = peaked(&w, 9, 9); // second "the" at token 9
        let p = best_span_in_window(&s, &w, CONTEXT, 30).unwrap();
        assert_eq!(p.text, "the");
        let ev = TaskEvidence { prediction: &p, window: &w, sheet: &s, context: CONTEXT };
        assert_eq!(ev.locate_nll("the", 30).unwrap(), Some(p.nll));
        assert_eq!(ev.locate_nll("he quick", 30).unwrap(), None);
        assert_eq!(ev.locate_nll("", 30).unwrap(), None);
        assert!(ev.text_nll("absent", 30).unwrap() >= p.nll);
    }

    #[test]
    fn top_n_spans_are_disjoint_and_distinct() {
        let w = window();
        let mut s = vec![-5.0; w.len()];
        let mut e = vec![-5.0; w.len()];
        s[4] = 3.0;
        e[4] = 3.0; // quick
        s[6] = 2.0;
        e[6] = 2.0; // fox
        s[11] = 1.0;
        e[11] = 1.0; // dog
        let sh = sheet(&w, s, e);
        let spans = top_n_spans(std::slice::from_ref(&w), std::slice::from_ref(&sh), CONTEXT, 3, 1).unwrap();
        let texts: Vec<_> = spans.iter().map(|s| s.text.as_str()).collect();
        assert_eq!(texts, vec!["quick", "fox", "dog"]);
        let joined = join_spans(&spans).unwrap();
        assert_eq!(joined.text, "quick fox dog");
        assert_eq!(joined.start_token, 4);
    }

    #[test]
    fn prediction_json_line() {
        let mut p = pred(1, 2.5, (3, 4));
        p.text = "ab".into();
        assert_eq!(
            p.to_json_line(),
            r#"{"post_id":"p","text":"ab","start_token":3,"end_token":4,"window_index":1,"task":"orig","score":2.5}"#
        );
    }
}

use serde::Serialize;

use spoilkit_core::corpus::{format_classification_input, ClickbaitPost};
use spoilkit_core::qa_prep::{
    prepare_task_inputs, truncate_for_classification, TaskInput, Tokenizer, WindowConfig, CLASSIFICATION_MAX_LEN,
};
use spoilkit_core::retrieval::{reduce_context, Bm25Params};
use spoilkit_core::scorer::{classify, score_window, Classification, ClassificationLogits, Scorer};
use spoilkit_core::span_select::{
    best_span_in_window, combine_tasks, join_spans, select_across_windows, top_n_spans, LogitSheet, SpanPrediction,
    TaskEvidence,
};
use spoilkit_core::{Result, SpoilerType};

use crate::config::{RunConfig, TypeSource};

/// One line of a classification predictions file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassLine {
    pub post_id: String,
    pub label: SpoilerType,
    pub probabilities: [f64; 3],
}

impl ClassLine {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("serializable")
    }
}

pub fn classify_post(post: &ClickbaitPost, scorer: &dyn Scorer, tokenizer: &dyn Tokenizer) -> Result<Classification> {
    let input = truncate_for_classification(&format_classification_input(post), tokenizer, CLASSIFICATION_MAX_LEN);
    classify(scorer, &post.id, &input)
}

/// Everything `generate` writes for one post.
#[derive(Debug, Clone)]
pub struct PostOutput {
    pub prediction: SpanPrediction,
    pub spoiler_type: SpoilerType,
    pub windows: Vec<String>,
    pub reduced: Option<String>,
    pub sheets: Vec<String>,
}

struct ScoredTask {
    input: TaskInput,
    sheets: Vec<LogitSheet>,
    best: SpanPrediction,
    best_pos: usize,
}

fn score_task(input: TaskInput, scorer: &dyn Scorer, max_answer: usize) -> Result<ScoredTask> {
    let mut sheets = Vec::with_capacity(input.windows.len());
    let mut preds = Vec::with_capacity(input.windows.len());
    for w in &input.windows {
        let sheet = score_window(scorer, w)?;
        preds.push(best_span_in_window(&sheet, w, &input.context.text, max_answer)?);
        sheets.push(sheet);
    }
    let best = select_across_windows(&preds)?;
    let best_pos = input.windows.iter().position(|w| w.window_index == best.window_index).expect("winner has a window");
    Ok(ScoredTask { input, sheets, best, best_pos })
}

impl ScoredTask {
    fn evidence(&self) -> TaskEvidence<'_> {
        TaskEvidence {
            prediction: &self.best,
            window: &self.input.windows[self.best_pos],
            sheet: &self.sheets[self.best_pos],
            context: &self.input.context.text,
        }
    }
}

fn spoiler_type_for(
    post: &ClickbaitPost,
    cfg: &RunConfig,
    scorer: &dyn Scorer,
    tokenizer: &dyn Tokenizer,
) -> Result<SpoilerType> {
    match (cfg.type_source, post.spoiler_type) {
        (TypeSource::Gold, Some(t)) => Ok(t),
        _ => Ok(classify_post(post, scorer, tokenizer)?.label),
    }
}

/// Reduce, window, score and select the spoiler of one post.
///
/// Phrase and passage posts take the best single span, combined across the
/// orig and aux tasks when an aux question exists. Multi posts join the top
/// non-overlapping spans of the orig task.
pub fn generate_post(
    post: &ClickbaitPost,
    cfg: &RunConfig,
    scorer: &dyn Scorer,
    tokenizer: &dyn Tokenizer,
) -> Result<PostOutput> {
    let spoiler_type = spoiler_type_for(post, cfg, scorer, tokenizer)?;
    let max_answer = cfg.max_answer_len.for_type(spoiler_type);
    let reduced = if cfg.reduce { Some(reduce_context(post, cfg.k, Bm25Params::default())?) } else { None };
    let wcfg = WindowConfig { max_len: cfg.max_len, stride: cfg.stride, passage_threshold: cfg.passage_threshold };
    let with_aux = cfg.use_aux && post.aux_question.is_some() && spoiler_type != SpoilerType::Multi;
    let inputs = prepare_task_inputs(post, reduced.as_ref(), &wcfg, tokenizer, with_aux)?;

    let mut windows: Vec<String> = inputs.orig.windows.iter().map(|w| w.to_json_line()).collect();
    if let Some(aux) = &inputs.aux {
        windows.extend(aux.windows.iter().map(|w| w.to_json_line()));
    }

    let orig = score_task(inputs.orig, scorer, max_answer)?;
    let aux = inputs.aux.map(|a| score_task(a, scorer, max_answer)).transpose()?;

    let prediction = if spoiler_type == SpoilerType::Multi {
        let spans =
            top_n_spans(&orig.input.windows, &orig.sheets, &orig.input.context.text, cfg.multi_spans, max_answer)?;
        join_spans(&spans).unwrap_or_else(|| orig.best.clone())
    } else {
        match &aux {
            Some(aux) => combine_tasks(&orig.evidence(), &aux.evidence(), cfg.alpha, max_answer)?,
            None => orig.best.clone(),
        }
    };

    let mut sheets: Vec<String> = Vec::new();
    if cfg.dump_logits {
        let input = truncate_for_classification(&format_classification_input(post), tokenizer, CLASSIFICATION_MAX_LEN);
        let logits = scorer.class_logits(&post.id, &input).map_err(spoilkit_core::Error::from)?;
        sheets.push(
            serde_json::to_string(&ClassificationLogits { post_id: post.id.clone(), logits }).expect("serializable"),
        );
        sheets.extend(orig.sheets.iter().map(|s| s.to_json_line()));
        if let Some(aux) = &aux {
            sheets.extend(aux.sheets.iter().map(|s| s.to_json_line()));
        }
    }
    Ok(PostOutput { prediction, spoiler_type, windows, reduced: reduced.map(|r| r.to_json_line()), sheets })
}

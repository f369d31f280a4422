use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{accuracy, bleu4, corpus_bleu4, macro_f1, meteor_reduced};
use crate::corpus::{CorpusSplit, SpoilerType};
use crate::error::{Error, Result, ValidationIssue};
use crate::mtl_math::TTestResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalTask {
    Classification,
    Generation,
}

impl fmt::Display for EvalTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvalTask::Classification => "classification",
            EvalTask::Generation => "generation",
        })
    }
}

impl FromStr for EvalTask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_lowercase().as_str() {
            "classification" | "classify" => Ok(EvalTask::Classification),
            "generation" | "generate" | "spoiler" => Ok(EvalTask::Generation),
            other => Err(Error::invalid(format!("unknown evaluation task {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BleuMode {
    /// Mean of per-sample scores.
    #[default]
    Sentence,
    /// Counts pooled over the split.
    Corpus,
}

impl FromStr for BleuMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_lowercase().as_str() {
            "sentence" => Ok(BleuMode::Sentence),
            "corpus" => Ok(BleuMode::Corpus),
            other => Err(Error::invalid(format!("unknown BLEU mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EvalOptions {
    pub bleu_mode: BleuMode,
}

/// One prediction line. Generation files carry `text`, classification files `label`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionLine {
    pub post_id: String,
    pub text: Option<String>,
    pub label: Option<SpoilerType>,
}

fn parse_label(v: &Value) -> std::result::Result<SpoilerType, String> {
    match v {
        Value::String(s) => s.parse().map_err(|e: Error| e.to_string()),
        Value::Number(n) => n
            .as_u64()
            .and_then(|c| SpoilerType::from_code(c as usize))
            .ok_or_else(|| format!("unknown spoiler type code {n}")),
        other => Err(format!("label must be a string or code, got {other}")),
    }
}

/// Read prediction JSONL. Problems are collected and reported together.
pub fn parse_predictions<R: BufRead>(reader: R) -> Result<Vec<PredictionLine>> {
    let mut out = Vec::new();
    let mut issues = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::invalid(format!("line {line_no}: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut issue =
            |id: Option<String>, message: String| issues.push(ValidationIssue { line: line_no, id, message });
        let value: Value = match serde_json::from_str(&line) {
            Ok(v) => v,
            Err(e) => {
                issue(None, format!("malformed JSON: {e}"));
                continue;
            }
        };
        let Some(post_id) = value.get("post_id").and_then(Value::as_str).map(str::to_owned) else {
            issue(None, "missing string field post_id".into());
            continue;
        };
        let text = match value.get("text") {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => Some(s.clone()),
            Some(other) => {
                issue(Some(post_id), format!("text must be a string, got {other}"));
                continue;
            }
        };
        let label = match value.get("label") {
            None | Some(Value::Null) => None,
            Some(v) => match parse_label(v) {
                Ok(l) => Some(l),
                Err(m) => {
                    issue(Some(post_id), m);
                    continue;
                }
            },
        };
        if let Some(first) = seen.insert(post_id.clone(), line_no) {
            issue(Some(post_id), format!("duplicate prediction (first on line {first})"));
            continue;
        }
        out.push(PredictionLine { post_id, text, label });
    }
    if issues.is_empty() {
        Ok(out)
    } else {
        Err(Error::Validation(issues))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTestSummary {
    pub metric: String,
    pub baseline: f64,
    pub runs: Vec<f64>,
    pub t_statistic: f64,
    pub p_value: f64,
    pub df: usize,
}

impl TTestSummary {
    pub fn new(metric: impl Into<String>, baseline: f64, runs: Vec<f64>, result: &TTestResult) -> Self {
        Self {
            metric: metric.into(),
            baseline,
            runs,
            t_statistic: result.t_statistic,
            p_value: result.p_value,
            df: result.df,
        }
    }
}

/// Metrics for one split. Generation reports fill `bleu4`/`meteor_reduced`,
/// classification reports fill `accuracy`/`macro_f1`/`per_class_f1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub split: String,
    pub task: EvalTask,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bleu4: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub meteor_reduced: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub macro_f1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub per_class_f1: Option<BTreeMap<SpoilerType, f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bert_score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ttest: Option<TTestSummary>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    /// Aligned plain-text table: one header row and one value row, then
    /// per-class F1 and the t-test when present.
    pub fn render_table(&self) -> String {
        let mut cols: Vec<(&str, String)> = vec![("split", self.split.clone()), ("n", self.n.to_string())];
        let pct = |v: f64| format!("{v:.2}");
        let frac = |v: f64| format!("{:.2}", v * 100.0);
        if let Some(v) = self.bleu4 {
            cols.push(("BLEU-4", pct(v)));
        }
        if let Some(v) = self.meteor_reduced {
            cols.push(("METEOR (reduced)", pct(v)));
        }
        if let Some(v) = self.bert_score {
            cols.push(("BERTScore", format!("{v:.4}")));
        }
        if let Some(v) = self.accuracy {
            cols.push(("Acc (%)", frac(v)));
        }
        if let Some(v) = self.macro_f1 {
            cols.push(("Macro-F1 (%)", frac(v)));
        }
        let widths: Vec<usize> = cols.iter().map(|(h, v)| h.len().max(v.len())).collect();
        let row = |cells: Vec<&str>| {
            cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect::<Vec<_>>().join("  ")
        };
        let header = row(cols.iter().map(|(h, _)| *h).collect());
        let values = row(cols.iter().map(|(_, v)| v.as_str()).collect());
        let rule = "-".repeat(header.len());
        let mut out = format!("{header}\n{rule}\n{values}\n");
        if let Some(per_class) = &self.per_class_f1 {
            out.push('\n');
            for (t, f1) in per_class {
                out.push_str(&format!("  F1 {:<8} {:>6}\n", t.as_str(), frac(*f1)));
            }
        }
        if let Some(t) = &self.ttest {
            out.push_str(&format!(
                "\nt-test on {} over {} runs vs baseline {}: t = {:.4}, df = {}, p = {:.4}\n",
                t.metric,
                t.runs.len(),
                t.baseline,
                t.t_statistic,
                t.df,
                t.p_value
            ));
        }
        out
    }
}

/// Score predictions against a split. Every labeled gold post must have a
/// prediction; unlabeled posts are skipped and extra predictions ignored.
pub fn evaluate_split(
    preds: &[PredictionLine],
    gold: &CorpusSplit,
    task: EvalTask,
    opts: EvalOptions,
) -> Result<EvalReport> {
    let by_id: HashMap<&str, &PredictionLine> = preds.iter().map(|p| (p.post_id.as_str(), p)).collect();
    let labeled: Vec<_> = gold.posts.iter().filter(|p| p.is_labeled()).collect();
    if labeled.is_empty() {
        return Err(Error::invalid(format!("split {} has no labeled posts", gold.name)));
    }
    let missing: Vec<String> = labeled
        .iter()
        .filter(|p| match (by_id.get(p.id.as_str()), task) {
            (None, _) => true,
            (Some(pred), EvalTask::Generation) => pred.text.is_none(),
            (Some(pred), EvalTask::Classification) => pred.label.is_none(),
        })
        .map(|p| p.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingPredictions(missing));
    }
    let mut report = EvalReport {
        split: gold.name.to_string(),
        task,
        n: labeled.len(),
        bleu4: None,
        meteor_reduced: None,
        accuracy: None,
        macro_f1: None,
        per_class_f1: None,
        bert_score: None,
        ttest: None,
    };
    match task {
        EvalTask::Generation => {
            let pairs: Vec<(&str, String)> = labeled
                .iter()
                .map(|p| (by_id[p.id.as_str()].text.as_deref().unwrap_or(""), p.gold_spoilers.join(" ")))
                .collect();
            let n = pairs.len() as f64;
            report.bleu4 = Some(match opts.bleu_mode {
                BleuMode::Sentence => pairs.iter().map(|(h, r)| bleu4(h, r)).sum::<f64>() / n,
                BleuMode::Corpus => corpus_bleu4(pairs.iter().map(|(h, r)| (*h, r.as_str()))),
            });
            report.meteor_reduced = Some(pairs.iter().map(|(h, r)| meteor_reduced(h, r)).sum::<f64>() / n);
        }
        EvalTask::Classification => {
            let gold_labels: Vec<SpoilerType> = labeled.iter().map(|p| p.spoiler_type.expect("labeled")).collect();
            let predicted: Vec<SpoilerType> =
                labeled.iter().map(|p| by_id[p.id.as_str()].label.expect("checked above")).collect();
            report.accuracy = Some(accuracy(&predicted, &gold_labels)?);
            let f1 = macro_f1(&predicted, &gold_labels)?;
            report.macro_f1 = Some(f1.macro_f1);
            report.per_class_f1 = Some(f1.per_class);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ClickbaitPost, SplitName, SpoilerPosition};

    fn post(id: &str, spoiler: &str, t: SpoilerType) -> ClickbaitPost {
        let para = format!("Intro words. {spoiler} closing words.");
        let start = "Intro words. ".chars().count();
        let end = start + spoiler.chars().count();
        ClickbaitPost {
            id: id.into(),
            title_text: "You won't believe this".into(),
            paragraphs: vec![para],
            gold_spoilers: vec![spoiler.into()],
            positions: vec![SpoilerPosition::new(0, start, 0, end)],
            spoiler_type: Some(t),
            aux_question: None,
        }
    }

    fn split() -> CorpusSplit {
        CorpusSplit {
            name: SplitName::Validation,
            posts: vec![post("a", "more butter", SpoilerType::Phrase), post("b", "a green door", SpoilerType::Phrase)],
        }
    }

    #[test]
    fn verbatim_predictions_score_full_marks() {
        let preds: Vec<PredictionLine> = split()
            .posts
            .iter()
            .map(|p| PredictionLine { post_id: p.id.clone(), text: Some(p.gold_spoilers[0].clone()), label: None })
            .collect();
        let r = evaluate_split(&preds, &split(), EvalTask::Generation, EvalOptions::default()).unwrap();
        assert_eq!(r.bleu4, Some(100.0));
        assert_eq!(r.meteor_reduced, Some(100.0));
        assert_eq!(r.accuracy, None);
        assert_eq!(r.n, 2);
        let table = r.render_table();
        assert!(table.contains("BLEU-4") && table.contains("100.00"));
    }

    #[test]
    fn missing_ids_are_listed() {
        let preds = vec![PredictionLine { post_id: "a".into(), text: Some("x".into()), label: None }];
        match evaluate_split(&preds, &split(), EvalTask::Generation, EvalOptions::default()) {
            Err(Error::MissingPredictions(ids)) => assert_eq!(ids, vec!["b".to_string()]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn classification_report() {
        let text = "{\"post_id\":\"a\",\"label\":\"phrase\",\"probabilities\":[0.9,0.05,0.05]}\n{\"post_id\":\"b\",\"label\":2}\n";
        let preds = parse_predictions(text.as_bytes()).unwrap();
        let r = evaluate_split(&preds, &split(), EvalTask::Classification, EvalOptions::default()).unwrap();
        assert_eq!(r.accuracy, Some(0.5));
        assert!(r.bleu4.is_none());
        let json = r.to_json();
        let back: EvalReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn prediction_parse_errors_collected() {
        let text =
            "{\"post_id\":\"a\",\"text\":\"x\"}\nnot json\n{\"post_id\":\"a\",\"text\":\"y\"}\n{\"text\":\"z\"}\n";
        match parse_predictions(text.as_bytes()) {
            Err(Error::Validation(issues)) => {
                assert_eq!(issues.iter().map(|i| i.line).collect::<Vec<_>>(), vec![2, 3, 4]);
            }
            other => panic!("{other:?}"),
        }
    }
}

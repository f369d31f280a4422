use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Scorer, ScorerError};
use crate::error::{Error, Result};
use crate::qa_prep::{Task, Window};
use crate::span_select::LogitSheet;

/// Classification line of the logit file: `{"post_id":..,"logits":[a,b,c]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationLogits {
    pub post_id: String,
    pub logits: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum LogitLine {
    Window(LogitSheet),
    Class(ClassificationLogits),
}

/// Replays precomputed logits from JSONL.
///
/// Window lines: `{"post_id","task","window_index","start_logits","end_logits"}`.
/// Classification lines: `{"post_id","logits"}`. Both kinds may share a file.
#[derive(Debug, Clone, Default)]
pub struct FileScorer {
    windows: HashMap<(String, Task, usize), LogitSheet>,
    classes: HashMap<String, Vec<f64>>,
}

impl FileScorer {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| Error::Io { path: path.to_owned(), source })?;
        Self::from_reader(BufReader::new(file))
    }

    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self> {
        let mut out = Self::default();
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|e| ScorerError::Parse { line: line_no, message: e.to_string() })?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: LogitLine = serde_json::from_str(&line)
                .map_err(|e| ScorerError::Parse { line: line_no, message: e.to_string() })?;
            let duplicate = match parsed {
                LogitLine::Window(sheet) => {
                    let key = (sheet.post_id.clone(), sheet.task, sheet.window_index);
                    out.windows.insert(key, sheet).is_some()
                }
                LogitLine::Class(c) => out.classes.insert(c.post_id, c.logits).is_some(),
            };
            if duplicate {
                return Err(ScorerError::Parse { line: line_no, message: "duplicate entry".into() }.into());
            }
        }
        Ok(out)
    }

    pub fn insert_sheet(&mut self, sheet: LogitSheet) {
        self.windows.insert((sheet.post_id.clone(), sheet.task, sheet.window_index), sheet);
    }

    pub fn insert_class_logits(&mut self, post_id: impl Into<String>, logits: Vec<f64>) {
        self.classes.insert(post_id.into(), logits);
    }

    pub fn n_windows(&self) -> usize {
        self.windows.len()
    }
}

impl Scorer for FileScorer {
    fn window_logits(&self, window: &Window) -> Result<LogitSheet, ScorerError> {
        self.windows.get(&(window.post_id.clone(), window.task, window.window_index)).cloned().ok_or_else(|| {
            ScorerError::UnknownWindow {
                post_id: window.post_id.clone(),
                task: window.task,
                window_index: window.window_index,
            }
        })
    }

    fn class_logits(&self, post_id: &str, _input: &str) -> Result<Vec<f64>, ScorerError> {
        self.classes.get(post_id).cloned().ok_or_else(|| ScorerError::UnknownPost(post_id.to_string()))
    }
}

impl LogitSheet {
    /// Wire line in the logit-file schema, no trailing newline.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("serializable")
    }
}

/// Write sheets as logit-file JSONL.
pub fn write_sheets<'a, W: Write>(
    out: &mut W,
    sheets: impl IntoIterator<Item = &'a LogitSheet>,
) -> std::io::Result<()> {
    for s in sheets {
        writeln!(out, "{}", s.to_json_line())?;
    }
    Ok(())
}

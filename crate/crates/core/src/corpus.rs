//! Webis-format clickbait corpus: ingestion, validation and addressing.
//!
//! Records are JSONL with the public release's field names (`uuid`,
//! `targetTitle`, `targetParagraphs`, `spoiler`, `spoilerPositions`, `tags`)
//! plus an optional `auxQuestion`. Spoiler positions are
//! `[[start_paragraph, start_char], [end_paragraph, end_char]]` with an
//! exclusive end, and **character offsets count Unicode scalar values, not
//! bytes**.
//!
//! Validation is fail-at-end: every problem in a file is collected and
//! reported together, each tagged with its 1-based line number.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ValidationIssue};
use crate::text::{char_len, char_slice};

/// Literal separator placed between title and context for classification.
pub const SEP_TOKEN: &str = "[SEP]";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpoilerType {
    Phrase = 0,
    Passage = 1,
    Multi = 2,
}

impl SpoilerType {
    pub const ALL: [SpoilerType; 3] = [SpoilerType::Phrase, SpoilerType::Passage, SpoilerType::Multi];

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Option<Self> {
        Self::ALL.get(code).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SpoilerType::Phrase => "phrase",
            SpoilerType::Passage => "passage",
            SpoilerType::Multi => "multi",
        }
    }
}

impl fmt::Display for SpoilerType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SpoilerType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().as_str() {
            "phrase" | "0" => Ok(SpoilerType::Phrase),
            "passage" | "1" => Ok(SpoilerType::Passage),
            "multi" | "2" => Ok(SpoilerType::Multi),
            other => Err(Error::invalid(format!("unknown spoiler type {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Validation,
    Test,
}

impl SplitName {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Validation => "validation",
            SplitName::Test => "test",
        }
    }
}

impl fmt::Display for SplitName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SplitName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_lowercase().as_str() {
            "train" => Ok(SplitName::Train),
            "validation" | "val" | "dev" => Ok(SplitName::Validation),
            "test" => Ok(SplitName::Test),
            other => Err(Error::invalid(format!("unknown split {other:?}"))),
        }
    }
}

/// Location of a gold spoiler inside a post's paragraphs (end exclusive).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpoilerPosition {
    pub start_paragraph: usize,
    pub start_char: usize,
    pub end_paragraph: usize,
    pub end_char: usize,
}

impl SpoilerPosition {
    pub fn new(start_paragraph: usize, start_char: usize, end_paragraph: usize, end_char: usize) -> Self {
        Self { start_paragraph, start_char, end_paragraph, end_char }
    }

    /// Checks ordering and bounds against a paragraph list.
    pub fn check(&self, paragraphs: &[String]) -> std::result::Result<(), String> {
        if self.start_paragraph > self.end_paragraph {
            return Err(format!("start paragraph {} after end paragraph {}", self.start_paragraph, self.end_paragraph));
        }
        if self.start_paragraph == self.end_paragraph && self.start_char >= self.end_char {
            return Err(format!("empty or inverted span {}..{}", self.start_char, self.end_char));
        }
        let n = paragraphs.len();
        if self.end_paragraph >= n {
            return Err(format!("paragraph index {} out of range ({n} paragraphs)", self.end_paragraph));
        }
        let start_len = char_len(&paragraphs[self.start_paragraph]);
        if self.start_char > start_len {
            return Err(format!(
                "start char {} beyond paragraph {} length {start_len}",
                self.start_char, self.start_paragraph
            ));
        }
        let end_len = char_len(&paragraphs[self.end_paragraph]);
        if self.end_char > end_len {
            return Err(format!("end char {} beyond paragraph {} length {end_len}", self.end_char, self.end_paragraph));
        }
        Ok(())
    }
}

/// One corpus record.
///
/// `spoiler_type` is `None` only for unlabeled records (e.g. a hidden test
/// split), which then carry no spoilers either.
#[derive(Debug, Clone, PartialEq)]
pub struct ClickbaitPost {
    pub id: String,
    pub title_text: String,
    pub paragraphs: Vec<String>,
    pub gold_spoilers: Vec<String>,
    pub positions: Vec<SpoilerPosition>,
    pub spoiler_type: Option<SpoilerType>,
    pub aux_question: Option<String>,
}

impl ClickbaitPost {
    pub fn is_labeled(&self) -> bool {
        self.spoiler_type.is_some()
    }

    /// All invariant violations of this record, empty when valid.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.id.is_empty() {
            out.push("empty uuid".to_string());
        }
        if self.paragraphs.is_empty() {
            out.push("no paragraphs".to_string());
        }
        if self.gold_spoilers.len() != self.positions.len() {
            out.push(format!("{} spoilers but {} positions", self.gold_spoilers.len(), self.positions.len()));
        }
        match self.spoiler_type {
            None if !self.gold_spoilers.is_empty() => {
                out.push("spoilers present without a spoiler type tag".to_string())
            }
            Some(SpoilerType::Multi) if self.gold_spoilers.len() < 2 => {
                out.push(format!("multi spoiler needs at least 2 spoilers, found {}", self.gold_spoilers.len()))
            }
            Some(t @ (SpoilerType::Phrase | SpoilerType::Passage)) if self.gold_spoilers.len() != 1 => {
                out.push(format!("{t} spoiler needs exactly 1 spoiler, found {}", self.gold_spoilers.len()))
            }
            _ => {}
        }
        for (k, (pos, gold)) in self.positions.iter().zip(&self.gold_spoilers).enumerate() {
            if let Err(msg) = pos.check(&self.paragraphs) {
                out.push(format!("position {k}: {msg}"));
                continue;
            }
            match extract_text_at(self, pos) {
                Ok(text) if &text == gold => {}
                Ok(text) => out.push(format!("position {k}: text at position {text:?} differs from spoiler {gold:?}")),
                Err(e) => out.push(format!("position {k}: {e}")),
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let problems = self.problems();
        if problems.is_empty() {
            return Ok(());
        }
        Err(Error::Validation(
            problems
                .into_iter()
                .map(|message| ValidationIssue { line: 0, id: Some(self.id.clone()), message })
                .collect(),
        ))
    }

    fn to_raw(&self) -> RawRecord {
        let labeled = self.is_labeled();
        RawRecord {
            uuid: self.id.clone(),
            target_title: self.title_text.clone(),
            target_paragraphs: self.paragraphs.clone(),
            spoiler: labeled.then(|| self.gold_spoilers.clone()),
            spoiler_positions: labeled.then(|| {
                self.positions
                    .iter()
                    .map(|p| {
                        [[p.start_paragraph as i64, p.start_char as i64], [p.end_paragraph as i64, p.end_char as i64]]
                    })
                    .collect()
            }),
            tags: self.spoiler_type.map(|t| vec![t.as_str().to_string()]),
            aux_question: self.aux_question.clone(),
        }
    }

    /// Canonical JSONL line: sorted keys, compact, no trailing newline.
    pub fn to_canonical_json(&self) -> String {
        // serde_json::Value maps are ordered by key, which gives the sort.
        let value = serde_json::to_value(self.to_raw()).expect("record serializes");
        value.to_string()
    }
}

/// Wire form of a record as found in the corpus files.
#[derive(Debug, Serialize, Deserialize)]
struct RawRecord {
    uuid: String,
    #[serde(rename = "targetTitle")]
    target_title: String,
    #[serde(rename = "targetParagraphs")]
    target_paragraphs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    spoiler: Option<Vec<String>>,
    #[serde(rename = "spoilerPositions", default, skip_serializing_if = "Option::is_none")]
    spoiler_positions: Option<Vec<[[i64; 2]; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tags: Option<Vec<String>>,
    #[serde(rename = "auxQuestion", default, skip_serializing_if = "Option::is_none")]
    aux_question: Option<String>,
}

impl RawRecord {
    fn into_post(self) -> std::result::Result<ClickbaitPost, String> {
        let spoiler_type = match &self.tags {
            None => None,
            Some(tags) => {
                let first = tags.first().ok_or("empty tags list")?;
                Some(first.parse::<SpoilerType>().map_err(|e| e.to_string())?)
            }
        };
        let mut positions = Vec::new();
        for (k, [[sp, sc], [ep, ec]]) in self.spoiler_positions.unwrap_or_default().into_iter().enumerate() {
            if [sp, sc, ep, ec].iter().any(|v| *v < 0) {
                return Err(format!("position {k}: negative index in [[{sp}, {sc}], [{ep}, {ec}]]"));
            }
            positions.push(SpoilerPosition::new(sp as usize, sc as usize, ep as usize, ec as usize));
        }
        Ok(ClickbaitPost {
            id: self.uuid,
            title_text: self.target_title,
            paragraphs: self.target_paragraphs,
            gold_spoilers: self.spoiler.unwrap_or_default(),
            positions,
            spoiler_type,
            aux_question: self.aux_question,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSplit {
    pub name: SplitName,
    pub posts: Vec<ClickbaitPost>,
}

impl CorpusSplit {
    pub fn len(&self) -> usize {
        self.posts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.posts.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&ClickbaitPost> {
        self.posts.iter().find(|p| p.id == id)
    }

    /// Number of posts per spoiler type; unlabeled posts are not counted.
    pub fn type_counts(&self) -> BTreeMap<SpoilerType, usize> {
        let mut counts: BTreeMap<SpoilerType, usize> = SpoilerType::ALL.iter().map(|t| (*t, 0)).collect();
        for t in self.posts.iter().filter_map(|p| p.spoiler_type) {
            *counts.entry(t).or_default() += 1;
        }
        counts
    }

    pub fn write_canonical<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for post in &self.posts {
            writeln!(out, "{}", post.to_canonical_json())?;
        }
        Ok(())
    }
}

/// Load and validate a JSONL corpus file.
pub fn load_corpus(path: impl AsRef<Path>, split: SplitName) -> Result<CorpusSplit> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io { path: path.to_owned(), source })?;
    parse_corpus(BufReader::new(file), split).map_err(|e| match e {
        Error::Io { source, .. } => Error::Io { path: path.to_owned(), source },
        other => other,
    })
}

/// Parse and validate JSONL from any reader. Blank lines are ignored.
pub fn parse_corpus<R: BufRead>(reader: R, split: SplitName) -> Result<CorpusSplit> {
    let mut posts = Vec::new();
    let mut issues = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| Error::Io { path: Default::default(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = match serde_json::from_str(&line) {
            Ok(v) => v,
            Err(e) => {
                issues.push(ValidationIssue { line: line_no, id: None, message: format!("malformed JSON: {e}") });
                continue;
            }
        };
        let id = value.get("uuid").and_then(|v| v.as_str()).map(str::to_owned);
        let issue = |message: String| ValidationIssue { line: line_no, id: id.clone(), message };
        let raw: RawRecord = match serde_json::from_value(value.clone()) {
            Ok(r) => r,
            Err(e) => {
                issues.push(issue(format!("schema error: {e}")));
                continue;
            }
        };
        let post = match raw.into_post() {
            Ok(p) => p,
            Err(msg) => {
                issues.push(issue(msg));
                continue;
            }
        };
        let problems = post.problems();
        if !problems.is_empty() {
            issues.extend(problems.into_iter().map(&issue));
            continue;
        }
        if !seen.insert(post.id.clone()) {
            issues.push(issue("duplicate uuid within split".to_string()));
            continue;
        }
        posts.push(post);
    }
    if issues.is_empty() {
        Ok(CorpusSplit { name: split, posts })
    } else {
        Err(Error::Validation(issues))
    }
}

/// `title [SEP] p0 p1 ...` classification input.
pub fn format_classification_input(post: &ClickbaitPost) -> String {
    format!("{} {} {}", post.title_text, SEP_TOKEN, post.paragraphs.join(" "))
}

/// Text covered by `pos`; paragraph boundaries inside the span become one space.
pub fn extract_text_at(post: &ClickbaitPost, pos: &SpoilerPosition) -> Result<String> {
    pos.check(&post.paragraphs).map_err(Error::InvalidInput)?;
    let oob = || Error::invalid(format!("position {pos:?} out of range"));
    if pos.start_paragraph == pos.end_paragraph {
        let p = &post.paragraphs[pos.start_paragraph];
        return char_slice(p, pos.start_char, pos.end_char).map(str::to_owned).ok_or_else(oob);
    }
    let mut parts = Vec::with_capacity(pos.end_paragraph - pos.start_paragraph + 1);
    let first = &post.paragraphs[pos.start_paragraph];
    parts.push(char_slice(first, pos.start_char, char_len(first)).ok_or_else(oob)?);
    for p in &post.paragraphs[pos.start_paragraph + 1..pos.end_paragraph] {
        parts.push(p.as_str());
    }
    let last = &post.paragraphs[pos.end_paragraph];
    parts.push(char_slice(last, 0, pos.end_char).ok_or_else(oob)?);
    Ok(parts.join(" "))
}

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use serde::Serialize;
use serde_json::Value;

use spoilkit_core::mtl_math::DEFAULT_ALPHA;
use spoilkit_core::qa_prep::{DEFAULT_MAX_LEN, DEFAULT_PASSAGE_THRESHOLD, DEFAULT_STRIDE};
use spoilkit_core::retrieval::DEFAULT_TOP_K;
use spoilkit_core::scorer::{BridgeScorer, FileScorer, Scorer, StubScorer};
use spoilkit_core::span_select::{MaxAnswerLen, DEFAULT_MULTI_SPANS};
use spoilkit_core::SplitName;

use crate::CliError;

/// Prefix of environment variables that override config keys.
pub const ENV_PREFIX: &str = "SPOILKIT_";

/// Where the logits come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScorerSpec {
    Stub {
        seed: u64,
    },
    /// Stub with +10 on each window's gold start and end.
    Teacher {
        seed: u64,
    },
    File(PathBuf),
    Bridge(String),
}

impl FromStr for ScorerSpec {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        let seed = |arg: Option<&str>| -> Result<u64, CliError> {
            arg.map_or(Ok(0), |a| a.parse().map_err(|_| CliError::config(format!("bad scorer seed {a:?}"))))
        };
        let required = |arg: Option<&str>| -> Result<String, CliError> {
            arg.filter(|a| !a.is_empty())
                .map(str::to_owned)
                .ok_or_else(|| CliError::config(format!("scorer {kind:?} needs an argument, e.g. {kind}:...")))
        };
        match kind {
            "stub" => Ok(ScorerSpec::Stub { seed: seed(arg)? }),
            "teacher" => Ok(ScorerSpec::Teacher { seed: seed(arg)? }),
            "file" => Ok(ScorerSpec::File(required(arg)?.into())),
            "bridge" => Ok(ScorerSpec::Bridge(required(arg)?)),
            other => Err(CliError::config(format!("unknown scorer {other:?} (stub, teacher, file, bridge)"))),
        }
    }
}

impl fmt::Display for ScorerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScorerSpec::Stub { seed } => write!(f, "stub:{seed}"),
            ScorerSpec::Teacher { seed } => write!(f, "teacher:{seed}"),
            ScorerSpec::File(p) => write!(f, "file:{}", p.display()),
            ScorerSpec::Bridge(cmd) => write!(f, "bridge:{cmd}"),
        }
    }
}

impl Serialize for ScorerSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl ScorerSpec {
    pub fn build(&self, timeout: Duration) -> Result<Box<dyn Scorer>, CliError> {
        Ok(match self {
            ScorerSpec::Stub { seed } => Box::new(StubScorer::new(*seed)),
            ScorerSpec::Teacher { seed } => Box::new(StubScorer::teacher(*seed)),
            ScorerSpec::File(path) => Box::new(FileScorer::from_path(path)?),
            ScorerSpec::Bridge(cmd) => Box::new(BridgeScorer::spawn(cmd, timeout).map_err(spoilkit_core::Error::from)?),
        })
    }
}

/// Which spoiler type drives generation for a post.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TypeSource {
    /// The gold tag, falling back to the classifier for unlabeled posts.
    Gold,
    /// Always the classifier.
    Predicted,
}

impl FromStr for TypeSource {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "gold" => Ok(TypeSource::Gold),
            "predicted" => Ok(TypeSource::Predicted),
            other => Err(CliError::config(format!("unknown type_source {other:?} (gold, predicted)"))),
        }
    }
}

/// Every knob of a run. Recorded verbatim in the run manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub train: Option<PathBuf>,
    pub validation: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub split: SplitName,
    pub k: usize,
    pub reduce: bool,
    pub alpha: f64,
    pub max_len: usize,
    pub stride: usize,
    pub passage_threshold: f64,
    pub max_answer_len: MaxAnswerLen,
    pub multi_spans: usize,
    pub use_aux: bool,
    pub type_source: TypeSource,
    pub scorer: ScorerSpec,
    pub bridge_timeout_secs: u64,
    pub vocab: Option<PathBuf>,
    pub dump_logits: bool,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            train: None,
            validation: None,
            test: None,
            split: SplitName::Validation,
            k: DEFAULT_TOP_K,
            reduce: true,
            alpha: DEFAULT_ALPHA,
            max_len: DEFAULT_MAX_LEN,
            stride: DEFAULT_STRIDE,
            passage_threshold: DEFAULT_PASSAGE_THRESHOLD,
            max_answer_len: MaxAnswerLen::default(),
            multi_spans: DEFAULT_MULTI_SPANS,
            use_aux: true,
            type_source: TypeSource::Gold,
            scorer: ScorerSpec::Stub { seed: 0 },
            bridge_timeout_secs: 120,
            vocab: None,
            dump_logits: false,
            output_dir: PathBuf::from("out"),
        }
    }
}

/// Keys accepted by [`RunConfig::set`], in manifest order.
pub const CONFIG_KEYS: [&str; 21] = [
    "train",
    "validation",
    "test",
    "split",
    "k",
    "reduce",
    "alpha",
    "max_len",
    "stride",
    "passage_threshold",
    "max_answer_len.phrase",
    "max_answer_len.passage",
    "max_answer_len.multi",
    "multi_spans",
    "use_aux",
    "type_source",
    "scorer",
    "bridge_timeout_secs",
    "vocab",
    "dump_logits",
    "output_dir",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value.trim().parse().map_err(|_| CliError::config(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value.trim().to_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(CliError::config(format!("{key}: expected a boolean, got {value:?}"))),
    }
}

fn opt_path(value: &str) -> Option<PathBuf> {
    let v = value.trim();
    (!v.is_empty()).then(|| PathBuf::from(v))
}

impl RunConfig {
    /// Set one key from its string form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "train" => self.train = opt_path(value),
            "validation" => self.validation = opt_path(value),
            "test" => self.test = opt_path(value),
            "split" => {
                self.split = value.trim().parse().map_err(|e: spoilkit_core::Error| CliError::config(e.to_string()))?
            }
            "k" => self.k = parse(key, value)?,
            "reduce" => self.reduce = parse_bool(key, value)?,
            "alpha" => self.alpha = parse(key, value)?,
            "max_len" => self.max_len = parse(key, value)?,
            "stride" => self.stride = parse(key, value)?,
            "passage_threshold" => self.passage_threshold = parse(key, value)?,
            "max_answer_len.phrase" => self.max_answer_len.phrase = parse(key, value)?,
            "max_answer_len.passage" => self.max_answer_len.passage = parse(key, value)?,
            "max_answer_len.multi" => self.max_answer_len.multi = parse(key, value)?,
            "multi_spans" => self.multi_spans = parse(key, value)?,
            "use_aux" => self.use_aux = parse_bool(key, value)?,
            "type_source" => self.type_source = value.trim().parse()?,
            "scorer" => self.scorer = value.trim().parse()?,
            "bridge_timeout_secs" => self.bridge_timeout_secs = parse(key, value)?,
            "vocab" => self.vocab = opt_path(value),
            "dump_logits" => self.dump_logits = parse_bool(key, value)?,
            "output_dir" => self.output_dir = PathBuf::from(value.trim()),
            other => return Err(CliError::config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Apply a `key=value` assignment.
    pub fn assign(&mut self, assignment: &str) -> Result<(), CliError> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("expected key=value, got {assignment:?}")))?;
        self.set(k.trim(), v)
    }

    /// Apply a config file: a JSON object, or `key = value` lines with `#` comments.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        if text.trim_start().starts_with('{') {
            let value: Value = serde_json::from_str(text).map_err(|e| CliError::config(format!("config JSON: {e}")))?;
            let Value::Object(map) = value else { unreachable!("starts with a brace") };
            for (key, v) in map {
                match v {
                    Value::Object(inner) => {
                        for (sub, v) in inner {
                            self.set(&format!("{key}.{sub}"), &json_scalar(&v)?)?;
                        }
                    }
                    other => self.set(&key, &json_scalar(&other)?)?,
                }
            }
            return Ok(());
        }
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            self.assign(line).map_err(|e| CliError::config(format!("config line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        self.apply_text(&text)
    }

    /// Apply `SPOILKIT_<KEY>` overrides; dots in keys become underscores.
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<(), CliError> {
        for key in CONFIG_KEYS {
            let var = format!("{ENV_PREFIX}{}", key.replace('.', "_").to_uppercase());
            if let Some(value) = lookup(&var) {
                self.set(key, &value).map_err(|e| CliError::config(format!("{var}: {e}")))?;
            }
        }
        Ok(())
    }

    /// Corpus path configured for `split`.
    pub fn split_path(&self, split: SplitName) -> Option<&Path> {
        match split {
            SplitName::Train => self.train.as_deref(),
            SplitName::Validation => self.validation.as_deref(),
            SplitName::Test => self.test.as_deref(),
        }
    }

    pub fn check(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::config(m.to_string()));
        if self.k == 0 {
            return bad("k must be at least 1");
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return bad("alpha must be finite and non-negative");
        }
        if self.stride >= self.max_len {
            return bad("stride must be smaller than max_len");
        }
        if !(0.0..=1.0).contains(&self.passage_threshold) {
            return bad("passage_threshold must lie in [0, 1]");
        }
        let m = self.max_answer_len;
        if m.phrase == 0 || m.passage == 0 || m.multi == 0 {
            return bad("max answer lengths must be positive");
        }
        if self.multi_spans == 0 {
            return bad("multi_spans must be at least 1");
        }
        Ok(())
    }

    pub fn bridge_timeout(&self) -> Duration {
        Duration::from_secs(self.bridge_timeout_secs)
    }
}

fn json_scalar(v: &Value) -> Result<String, CliError> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Null => Ok(String::new()),
        Value::Bool(_) | Value::Number(_) => Ok(v.to_string()),
        other => Err(CliError::config(format!("unsupported config value {other}"))),
    }
}

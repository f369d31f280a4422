//! Command implementations behind the `spoilkit` binary.
//!
//! Every command writes its artifacts atomically into an output directory
//! together with a `manifest.json` holding the effective config and the
//! sha256 of every input and output file.

pub mod artifacts;
pub mod config;
pub mod pipeline;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use spoilkit_core::corpus::{load_corpus, CorpusSplit};
use spoilkit_core::metrics::{evaluate_split, parse_predictions, EvalOptions, EvalReport, EvalTask, TTestSummary};
use spoilkit_core::mtl_math::{one_sample_ttest, Alternative};
use spoilkit_core::qa_prep::{ReferenceTokenizer, Tokenizer, VocabTokenizer};
use spoilkit_core::{ClickbaitPost, SplitName, SpoilerType};

use artifacts::{jsonl, RunOutput};
use config::RunConfig;
use pipeline::{classify_post, generate_post, ClassLine};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_SCORER: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] spoilkit_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config: {0}")]
    Config(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_owned(), source }
    }

    /// 2 for scorer and transport failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(spoilkit_core::Error::Scorer(_)) => EXIT_SCORER,
            _ => EXIT_VALIDATION,
        }
    }
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(|e| CliError::config(format!("thread pool: {e}")))
}

/// Posts ordered by id so outputs do not depend on input order or job count.
fn sorted_posts(split: &CorpusSplit) -> Vec<&ClickbaitPost> {
    let mut posts: Vec<&ClickbaitPost> = split.posts.iter().collect();
    posts.sort_by(|a, b| a.id.cmp(&b.id));
    posts
}

fn tokenizer(cfg: &RunConfig) -> Result<Box<dyn Tokenizer>, CliError> {
    Ok(match &cfg.vocab {
        Some(path) => Box::new(VocabTokenizer::from_file(path)?),
        None => Box::new(ReferenceTokenizer),
    })
}

fn type_summary(split: &CorpusSplit) -> String {
    let counts = split.type_counts();
    let get = |t: SpoilerType| counts.get(&t).copied().unwrap_or(0);
    let unlabeled = split.posts.iter().filter(|p| !p.is_labeled()).count();
    let mut out = format!(
        "{} posts; phrase {}, passage {}, multi {}",
        split.len(),
        get(SpoilerType::Phrase),
        get(SpoilerType::Passage),
        get(SpoilerType::Multi)
    );
    if unlabeled > 0 {
        let _ = write!(out, ", unlabeled {unlabeled}");
    }
    out
}

/// Resolved corpus input of a run.
fn corpus_input(cfg: &RunConfig, input: Option<&Path>) -> Result<PathBuf, CliError> {
    input
        .or_else(|| cfg.split_path(cfg.split))
        .map(Path::to_owned)
        .ok_or_else(|| CliError::config(format!("no corpus given: pass --input or set `{}` in the config", cfg.split)))
}

fn config_json(cfg: &RunConfig) -> serde_json::Value {
    serde_json::to_value(cfg).expect("serializable")
}

#[derive(Debug, Clone)]
pub struct IngestArgs {
    pub input: PathBuf,
    pub split: SplitName,
    pub out: PathBuf,
}

/// Validate a corpus file and write its canonical JSONL. Returns the stats line.
pub fn cmd_ingest(args: &IngestArgs) -> Result<String, CliError> {
    let split = load_corpus(&args.input, args.split)?;
    let mut buf = Vec::new();
    split.write_canonical(&mut buf).map_err(|e| CliError::io(&args.input, e))?;
    let config = serde_json::json!({ "input": args.input, "split": args.split });
    let mut run = RunOutput::new("ingest", &args.out, config);
    run.add_input(&args.input)?;
    run.write(&format!("{}.jsonl", args.split), &buf)?;
    run.finish()?;
    Ok(type_summary(&split))
}

#[derive(Debug, Clone)]
pub struct RunArgs {
    pub config: RunConfig,
    pub config_file: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub jobs: usize,
}

fn start_run(command: &str, args: &RunArgs) -> Result<(CorpusSplit, PathBuf, RunOutput), CliError> {
    args.config.check()?;
    let input = corpus_input(&args.config, args.input.as_deref())?;
    let split = load_corpus(&input, args.config.split)?;
    let mut run = RunOutput::new(command, &args.config.output_dir, config_json(&args.config));
    if let Some(f) = &args.config_file {
        run.add_input(f)?;
    }
    run.add_input(&input)?;
    if let config::ScorerSpec::File(p) = &args.config.scorer {
        run.add_input(p)?;
    }
    if let Some(v) = &args.config.vocab {
        run.add_input(v)?;
    }
    Ok((split, input, run))
}

/// Summary of a finished classify or generate run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub message: String,
    pub report: Option<EvalReport>,
    pub output_dir: PathBuf,
}

/// Predict spoiler types; writes `classifications.jsonl` and, when gold
/// labels exist, `report.json`.
pub fn cmd_classify(args: &RunArgs) -> Result<RunSummary, CliError> {
    let (split, _, mut run) = start_run("classify", args)?;
    let cfg = &args.config;
    let scorer = cfg.scorer.build(cfg.bridge_timeout())?;
    let tok = tokenizer(cfg)?;
    let posts = sorted_posts(&split);
    let lines: Vec<ClassLine> = thread_pool(args.jobs)?.install(|| {
        posts
            .par_iter()
            .map(|p| {
                classify_post(p, scorer.as_ref(), tok.as_ref()).map(|c| ClassLine {
                    post_id: p.id.clone(),
                    label: c.label,
                    probabilities: c.probabilities,
                })
            })
            .collect::<Result<_, _>>()
    })?;
    run.write("classifications.jsonl", &jsonl(lines.iter().map(ClassLine::to_json_line)))?;
    let report = if split.posts.iter().any(ClickbaitPost::is_labeled) {
        let preds = lines
            .iter()
            .map(|l| spoilkit_core::metrics::PredictionLine {
                post_id: l.post_id.clone(),
                text: None,
                label: Some(l.label),
            })
            .collect::<Vec<_>>();
        let report = evaluate_split(&preds, &split, EvalTask::Classification, EvalOptions::default())?;
        run.write("report.json", (report.to_json() + "\n").as_bytes())?;
        Some(report)
    } else {
        None
    };
    run.finish()?;
    let mut message = format!("classified {} posts into {}", lines.len(), cfg.output_dir.display());
    if report.is_none() {
        message.push_str(" (no gold labels; metrics omitted)");
    }
    Ok(RunSummary { message, report, output_dir: cfg.output_dir.clone() })
}

/// Extract spoilers; writes `predictions.jsonl`, `windows.jsonl`, plus
/// `reduced.jsonl` with reduction on and `logits.jsonl` when dumping logits.
pub fn cmd_generate(args: &RunArgs) -> Result<RunSummary, CliError> {
    let (split, _, mut run) = start_run("generate", args)?;
    let cfg = &args.config;
    let scorer = cfg.scorer.build(cfg.bridge_timeout())?;
    let tok = tokenizer(cfg)?;
    let posts = sorted_posts(&split);
    let outputs: Vec<_> = thread_pool(args.jobs)?.install(|| {
        posts.par_iter().map(|p| generate_post(p, cfg, scorer.as_ref(), tok.as_ref())).collect::<Result<_, _>>()
    })?;
    run.write("predictions.jsonl", &jsonl(outputs.iter().map(|o| o.prediction.to_json_line())))?;
    run.write("windows.jsonl", &jsonl(outputs.iter().flat_map(|o| o.windows.iter().cloned())))?;
    if cfg.reduce {
        run.write("reduced.jsonl", &jsonl(outputs.iter().filter_map(|o| o.reduced.clone())))?;
    }
    if cfg.dump_logits {
        run.write("logits.jsonl", &jsonl(outputs.iter().flat_map(|o| o.sheets.iter().cloned())))?;
    }
    run.finish()?;
    let mut by_type: BTreeMap<SpoilerType, usize> = BTreeMap::new();
    for o in &outputs {
        *by_type.entry(o.spoiler_type).or_default() += 1;
    }
    let types = by_type.iter().map(|(t, n)| format!("{t} {n}")).collect::<Vec<_>>().join(", ");
    let message = format!("generated {} spoilers ({types}) into {}", outputs.len(), cfg.output_dir.display());
    Ok(RunSummary { message, report: None, output_dir: cfg.output_dir.clone() })
}

#[derive(Debug, Clone)]
pub struct EvalArgs {
    pub pred: PathBuf,
    pub gold: PathBuf,
    pub split: SplitName,
    pub task: EvalTask,
    pub options: EvalOptions,
    /// Per-run score files for a one-sample t-test against `baseline`.
    pub runs: Vec<PathBuf>,
    pub baseline: Option<f64>,
    /// Report field the runs are read from; defaults by task.
    pub metric: Option<String>,
    pub out: Option<PathBuf>,
}

fn default_metric(task: EvalTask) -> &'static str {
    match task {
        EvalTask::Generation => "bleu4",
        EvalTask::Classification => "accuracy",
    }
}

/// A run score file holds a bare number or a report JSON carrying `metric`.
pub fn read_run_score(path: &Path, metric: &str) -> Result<f64, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let bad = |m: String| CliError::Core(spoilkit_core::Error::InvalidInput(format!("{}: {m}", path.display())));
    let value: serde_json::Value = serde_json::from_str(text.trim()).map_err(|e| bad(e.to_string()))?;
    let number = match &value {
        serde_json::Value::Number(_) => value.as_f64(),
        serde_json::Value::Object(map) => map.get(metric).and_then(serde_json::Value::as_f64),
        _ => None,
    };
    number.filter(|x| x.is_finite()).ok_or_else(|| bad(format!("no finite {metric} score")))
}

/// Score a prediction file against gold, optionally with a t-test over run scores.
pub fn cmd_eval(args: &EvalArgs) -> Result<EvalReport, CliError> {
    let gold = load_corpus(&args.gold, args.split)?;
    let file = std::fs::File::open(&args.pred).map_err(|e| CliError::io(&args.pred, e))?;
    let preds = parse_predictions(std::io::BufReader::new(file))?;
    let mut report = evaluate_split(&preds, &gold, args.task, args.options)?;
    if !args.runs.is_empty() {
        let baseline = args.baseline.ok_or_else(|| CliError::config("--runs needs --baseline for the t-test"))?;
        let metric = args.metric.clone().unwrap_or_else(|| default_metric(args.task).to_string());
        let scores = args.runs.iter().map(|p| read_run_score(p, &metric)).collect::<Result<Vec<_>, _>>()?;
        let result = one_sample_ttest(&scores, baseline, Alternative::TwoSided)?;
        report.ttest = Some(TTestSummary::new(metric, baseline, scores, &result));
    }
    if let Some(out) = &args.out {
        artifacts::write_atomic(out, (report.to_json() + "\n").as_bytes())?;
    }
    Ok(report)
}

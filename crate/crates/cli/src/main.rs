use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use spoilkit_cli::config::RunConfig;
use spoilkit_cli::{cmd_classify, cmd_eval, cmd_generate, cmd_ingest, CliError, EvalArgs, IngestArgs, RunArgs};
use spoilkit_core::metrics::{BleuMode, EvalOptions, EvalTask};
use spoilkit_core::SplitName;

#[derive(Parser)]
#[command(name = "spoilkit", version, about = "Clickbait spoiling pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a corpus file and write its canonical JSONL.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "validation")]
        split: SplitName,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Predict spoiler types.
    Classify(RunFlags),
    /// Extract spoilers.
    Generate {
        #[command(flatten)]
        run: RunFlags,
        /// Run BM25 context reduction before windowing.
        #[arg(long, overrides_with = "no_reduce")]
        reduce: bool,
        /// Use every paragraph as context.
        #[arg(long, overrides_with = "reduce")]
        no_reduce: bool,
        /// Paragraphs kept by the reduction.
        #[arg(long)]
        k: Option<usize>,
        /// Weight of the aux task in the combined span cost.
        #[arg(long)]
        alpha: Option<f64>,
        /// Write the scored logits to logits.jsonl.
        #[arg(long)]
        dump_logits: bool,
    },
    /// Score predictions against a gold corpus.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        task: EvalTask,
        #[arg(long, default_value = "validation")]
        split: SplitName,
        #[arg(long, default_value = "sentence")]
        bleu: BleuMode,
        /// Per-run score files (a number, or a report JSON) for a t-test.
        #[arg(long, num_args = 1..)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        baseline: Option<f64>,
        /// Report field read from run files.
        #[arg(long)]
        metric: Option<String>,
        /// Also write the report JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print JSON instead of the table.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct RunFlags {
    /// Config file, JSON or key=value lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra key=value settings, applied after the file and the environment.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Corpus file; defaults to the config path of --split.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    split: Option<SplitName>,
    /// stub[:seed], teacher[:seed], file:PATH or bridge:COMMAND.
    #[arg(long)]
    scorer: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0, env = "SPOILKIT_JOBS")]
    jobs: usize,
}

impl RunFlags {
    fn resolve(self, extra: &[(&str, String)]) -> Result<RunArgs, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        cfg.apply_env(|k| std::env::var(k).ok())?;
        for s in &self.set {
            cfg.assign(s)?;
        }
        if let Some(s) = self.split {
            cfg.split = s;
        }
        if let Some(s) = &self.scorer {
            cfg.set("scorer", s)?;
        }
        if let Some(o) = self.out {
            cfg.output_dir = o;
        }
        for (k, v) in extra {
            cfg.set(k, v)?;
        }
        Ok(RunArgs { config: cfg, config_file: self.config, input: self.input, jobs: self.jobs })
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Ingest { input, split, out } => {
            println!("{}", cmd_ingest(&IngestArgs { input, split, out })?);
        }
        Command::Classify(flags) => {
            let summary = cmd_classify(&flags.resolve(&[])?)?;
            println!("{}", summary.message);
            if let Some(report) = summary.report {
                print!("{}", report.render_table());
            }
        }
        Command::Generate { run, reduce, no_reduce, k, alpha, dump_logits } => {
            let mut extra = Vec::new();
            if reduce || no_reduce {
                extra.push(("reduce", reduce.to_string()));
            }
            if let Some(k) = k {
                extra.push(("k", k.to_string()));
            }
            if let Some(a) = alpha {
                extra.push(("alpha", a.to_string()));
            }
            if dump_logits {
                extra.push(("dump_logits", "true".to_string()));
            }
            println!("{}", cmd_generate(&run.resolve(&extra)?)?.message);
        }
        Command::Eval { pred, gold, task, split, bleu, runs, baseline, metric, out, json } => {
            let args = EvalArgs {
                pred,
                gold,
                split,
                task,
                options: EvalOptions { bleu_mode: bleu },
                runs,
                baseline,
                metric,
                out,
            };
            let report = cmd_eval(&args)?;
            if json {
                println!("{}", report.to_json());
            } else {
                print!("{}", report.render_table());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

//! Command-line entry point. Exit codes: 0 success, 1 domain or
//! configuration error, 2 usage error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::ablation::{
    combined_csv, default_matrix, evaluate_sessions, export_finetune_dataset, load_matrix,
    render_table, run_matrix, write_file, AblationError, ExperimentConfig, FinetuneOptions,
    Pipeline, RunOptions, RunStatus, SessionOutcome,
};
use crate::backend::{BackendConfig, BackendKind};
use crate::corpus::{
    load_corpus, split_dataset, Corpus, CorpusFormat, PopularityTable,
    DEFAULT_SPLIT_RATIO, DEFAULT_TOP_K,
};
use crate::metrics::{EvalParams, REPORT_CSV_HEADER};
use crate::prompting::{ExampleSelection, PromptStrategy, StrategyKind, DEFAULT_EXAMPLE_COUNT};
use crate::rerank::PenaltyParams;

pub const API_KEY_ENV: &str = "TPL_BENCH_API_KEY";

#[derive(Debug, Parser)]
#[command(name = "tpl-bench", version, about = "Third-party library recommendation benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load a corpus, report what was skipped, optionally re-serialize it.
    Ingest {
        #[command(flatten)]
        input: CorpusArgs,
        /// Output file; `.jsonl` writes records, anything else tab-separated.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the most used libraries in rank order.
    Popularity {
        #[command(flatten)]
        input: CorpusArgs,
        #[arg(long, default_value_t = DEFAULT_TOP_K)]
        top: usize,
        /// Write the full table as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a seeded train/test split as train.jsonl and test.jsonl.
    Split {
        #[command(flatten)]
        input: CorpusArgs,
        #[arg(long, default_value_t = DEFAULT_SPLIT_RATIO)]
        ratio: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run recommendation sessions for the test split; writes one JSON
    /// object per session.
    Recommend {
        #[command(flatten)]
        input: CorpusArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Session file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory for prompt/reply transcripts.
        #[arg(long)]
        transcripts: Option<PathBuf>,
    },
    /// Score a session file produced by `recommend`.
    Evaluate {
        #[command(flatten)]
        input: CorpusArgs,
        #[arg(long)]
        recs: PathBuf,
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = DEFAULT_SPLIT_RATIO)]
        ratio: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value = "run")]
        id: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every configuration of an experiment matrix.
    Ablate {
        #[command(flatten)]
        input: CorpusArgs,
        /// Matrix JSON; the built-in six-row matrix when omitted.
        #[arg(long)]
        matrix: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides every configuration's split seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Export a masked prompt/completion dataset and training manifest.
    ExportFinetune {
        #[command(flatten)]
        input: CorpusArgs,
        #[arg(long, default_value_t = DEFAULT_SPLIT_RATIO)]
        ratio: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 0.5)]
        mask_fraction: f64,
        #[arg(long, default_value_t = DEFAULT_EXAMPLE_COUNT)]
        examples: usize,
        #[arg(long, default_value_t = DEFAULT_TOP_K)]
        top: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct CorpusArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// tabular or jsonl; guessed from the extension by default.
    #[arg(long)]
    format: Option<CorpusFormat>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long, default_value_t = DEFAULT_TOP_K)]
    top: usize,
    #[arg(long, default_value_t = DEFAULT_SPLIT_RATIO)]
    ratio: f64,
    #[arg(long, default_value = "mock-popularity")]
    backend: BackendKind,
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
    /// Enables popularity re-ranking with this weight.
    #[arg(long)]
    penalty_lambda: Option<f64>,
    #[arg(long, default_value = "few-shot")]
    strategy: StrategyKind,
    #[arg(long, default_value_t = DEFAULT_EXAMPLE_COUNT)]
    examples: usize,
    /// Pick few-shot examples at random instead of by overlap.
    #[arg(long)]
    random_examples: bool,
    /// Use the fine-tuned model name.
    #[arg(long)]
    finetuned: bool,
}

impl RunArgs {
    fn to_config(&self) -> ExperimentConfig {
        let mut backend = BackendConfig::mock(self.backend);
        if let Some(e) = &self.endpoint {
            backend.endpoint_url = e.clone();
        }
        if let Some(m) = &self.model {
            backend.model_name = m.clone();
        }
        let mut config = ExperimentConfig::new(
            "run",
            backend,
            PromptStrategy::of_kind(self.strategy, self.examples),
        );
        if let Some(lambda) = self.penalty_lambda {
            config.penalty = PenaltyParams::enabled(lambda);
        }
        config.eval = EvalParams::at(self.n);
        config.split_seed = self.seed;
        config.split_ratio = self.ratio;
        config.top_popular_k = self.top;
        config.finetuned_model = self.finetuned;
        if self.random_examples {
            config.example_selection = ExampleSelection::Random;
        }
        config
    }
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Ablation(#[from] AblationError),
    #[error(transparent)]
    Corpus(#[from] crate::corpus::CorpusError),
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
    #[error("{0}")]
    Other(String),
}

fn load(input: &CorpusArgs) -> Result<Corpus, CliError> {
    let format = input.format.unwrap_or_else(|| CorpusFormat::from_path(&input.corpus));
    let loaded = load_corpus(&input.corpus, format)?;
    for w in &loaded.warnings {
        eprintln!(
            "warning: line {}: skipped {}",
            w.line,
            w.skipped.join(", ")
        );
    }
    for line in &loaded.rejected_lines {
        eprintln!("warning: line {line}: no usable record");
    }
    Ok(loaded.corpus)
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    Ok(write_file(path, text)?)
}

fn api_key() -> Option<String> {
    std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty())
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(command: Command) -> Result<i32, CliError> {
    match command {
        Command::Ingest { input, out } => {
            let corpus = load(&input)?;
            eprintln!(
                "{} projects, {} distinct libraries",
                corpus.len(),
                corpus.catalog().len()
            );
            if let Some(out) = out {
                let text = match CorpusFormat::from_path(&out) {
                    CorpusFormat::RecordPerLine => corpus.to_jsonl(),
                    CorpusFormat::Tabular => corpus.to_tabular(),
                };
                write(&out, &text)?;
            }
        }
        Command::Popularity { input, top, out } => {
            let corpus = load(&input)?;
            let table = PopularityTable::from_projects(corpus.projects());
            for e in table.entries().iter().take(top) {
                println!("{}\t{}\t{}", e.rank, e.coordinate, e.usage_count);
            }
            if let Some(out) = out {
                write(&out, &table.to_csv())?;
            }
        }
        Command::Split {
            input,
            ratio,
            seed,
            out,
        } => {
            let corpus = load(&input)?;
            let split = split_dataset(&corpus, ratio, seed)?;
            write(&out.join("train.jsonl"), &Corpus::new(split.train.clone())?.to_jsonl())?;
            write(&out.join("test.jsonl"), &Corpus::new(split.test.clone())?.to_jsonl())?;
            eprintln!("train {} / test {}", split.train.len(), split.test.len());
        }
        Command::Recommend {
            input,
            run,
            out,
            transcripts,
        } => {
            let corpus = load(&input)?;
            let config = run.to_config();
            let options = RunOptions {
                out_dir: transcripts,
                api_key: api_key(),
                ..Default::default()
            };
            let pipeline = Pipeline::new(&config, &corpus, &options)?;
            let (cases, excluded) = pipeline.test_cases();
            for id in excluded {
                eprintln!("note: {id} has no dependencies; skipped");
            }
            let outcomes = pipeline.run_sessions(&cases);
            let mut text = String::new();
            for o in &outcomes {
                if o.status.is_failure() {
                    eprintln!("warning: {}: {:?}", o.project_id, o.status);
                }
                text.push_str(&serde_json::to_string(o).map_err(|e| CliError::Other(e.to_string()))?);
                text.push('\n');
            }
            match out {
                Some(path) => write(&path, &text)?,
                None => print!("{text}"),
            }
        }
        Command::Evaluate {
            input,
            recs,
            n,
            ratio,
            seed,
            id,
            out,
        } => {
            let corpus = load(&input)?;
            let text = fs::read_to_string(&recs)
                .map_err(|e| CliError::Other(format!("cannot read {}: {e}", recs.display())))?;
            let mut outcomes: BTreeMap<String, SessionOutcome> = BTreeMap::new();
            for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                let o: SessionOutcome = serde_json::from_str(line).map_err(|e| {
                    CliError::Other(format!("{}:{}: {e}", recs.display(), i + 1))
                })?;
                outcomes.insert(o.project_id.clone(), o);
            }
            let split = split_dataset(&corpus, ratio, seed)?;
            let table = PopularityTable::from_projects(&split.train);
            let mut config = ExperimentConfig::new(
                id.clone(),
                BackendConfig::default(),
                PromptStrategy::zero_shot(),
            );
            config.eval = EvalParams::at(n);
            let outcomes: Vec<_> = outcomes.into_values().collect();
            let report = evaluate_sessions(&outcomes, &table, &corpus, &config)?;
            let csv = format!("{REPORT_CSV_HEADER}\n{}\n", report.csv_row(&id));
            print!("{csv}");
            if let Some(out) = out {
                write(&out, &csv)?;
            }
        }
        Command::Ablate {
            input,
            matrix,
            out,
            seed,
        } => {
            let corpus = load(&input)?;
            let mut configs = match &matrix {
                Some(path) => load_matrix(path)?,
                None => default_matrix(),
            };
            if let Some(seed) = seed {
                configs.iter_mut().for_each(|c| c.split_seed = seed);
            }
            let options = RunOptions {
                out_dir: Some(out.join("transcripts")),
                api_key: api_key(),
                ..Default::default()
            };
            let entries = run_matrix(&configs, &corpus, &options)?;
            let mut code = 0;
            let mut results = Vec::new();
            for e in &entries {
                match &e.outcome {
                    Ok(r) => {
                        if r.status == RunStatus::Failed {
                            eprintln!(
                                "warning: {}: {} of {} sessions hit backend errors",
                                r.config_id, r.backend_errors, r.sessions_total
                            );
                            code = 1;
                        }
                        results.push(r);
                    }
                    Err(err) => {
                        eprintln!("error: {}: {err}", e.config_id);
                        code = 1;
                    }
                }
            }
            let runs = serde_json::to_string_pretty(&results)
                .map_err(|e| CliError::Other(e.to_string()))?;
            write(&out.join("runs.json"), &(runs + "\n"))?;
            write(&out.join("report.csv"), &combined_csv(&entries))?;
            let table = render_table(&entries);
            write(&out.join("report.txt"), &table)?;
            print!("{table}");
            return Ok(code);
        }
        Command::ExportFinetune {
            input,
            ratio,
            seed,
            mask_fraction,
            examples,
            top,
            out,
        } => {
            let corpus = load(&input)?;
            let split = split_dataset(&corpus, ratio, seed)?;
            let options = FinetuneOptions {
                mask_fraction,
                seed,
                example_count: examples,
                top_popular_k: top,
                ..Default::default()
            };
            let n = export_finetune_dataset(&split, &options, &out)?;
            eprintln!("wrote {n} records to {}", out.display());
        }
    }
    Ok(0)
}

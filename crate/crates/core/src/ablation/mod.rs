//! End-to-end experiment driver: split, prompt, query, parse, re-rank and
//! evaluate, once per configuration of an experiment matrix.

mod config;
mod finetune;
mod session;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{build_backend, parse_maven_list, render_maven_list, Backend, BackendError, RecommendationList, Session};
use crate::corpus::{split_dataset, Corpus, CorpusError, DatasetSplit, PopularityTable};
use crate::metrics::{evaluate_all, GroundTruth, MetricsError, MetricsReport, REPORT_CSV_HEADER};
use crate::prompting::{
    render_target, select_examples, ConversationHistory, InstructionSet, PromptError,
    PromptRenderer, PromptStrategy, PromptTemplates, StrategyKind,
};
use crate::rerank::apply_penalty;
use crate::seed;

pub use config::{
    default_matrix, default_matrix_json, load_matrix, parse_matrix, ExperimentConfig, MatrixFile,
    StrategyConfig, DEFAULT_HISTORY_WINDOW, DEFAULT_SPLIT_SEED, DEFAULT_VISIBLE_FRACTION,
};
pub use finetune::{
    build_finetune_records, export_finetune_dataset, leaked_coordinates, FinetuneManifest,
    FinetuneOptions, FinetuneRecord, FINETUNE_FILE, MANIFEST_FILE,
};
pub use session::{
    build_test_cases, hold_out, visible_count, SessionLog, SessionOutcome, SessionStatus, TestCase,
};

#[derive(Debug, Error)]
pub enum AblationError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("test split has no projects to evaluate")]
    EmptyTestSplit,
    #[error("{0}")]
    Export(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), AblationError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| AblationError::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, contents).map_err(|source| AblationError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn file_safe(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') { c } else { '_' })
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Root for per-session transcripts (`{out}/{config_id}/{project_id}.txt`).
    pub out_dir: Option<PathBuf>,
    pub templates: PromptTemplates,
    /// Bearer token for remote backends.
    pub api_key: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Completed,
    /// More than half of the sessions hit backend errors.
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub config_id: String,
    pub status: RunStatus,
    pub report: MetricsReport,
    pub sessions_total: usize,
    pub sessions_parsed: usize,
    pub sessions_failed: usize,
    pub backend_errors: usize,
    pub sessions: Vec<SessionLog>,
    pub train_size: usize,
    pub test_size: usize,
    pub catalog_size: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transcripts_path: Option<String>,
    pub started: String,
    pub finished: String,
}

/// A configured run over one split: owns the backend and everything the
/// sessions share.
pub struct Pipeline {
    pub config: ExperimentConfig,
    pub split: DatasetSplit,
    pub table: PopularityTable,
    strategy: PromptStrategy,
    instructions: InstructionSet,
    renderer: PromptRenderer,
    backend: Box<dyn Backend>,
    transcripts: Option<PathBuf>,
}

impl Pipeline {
    pub fn new(
        config: &ExperimentConfig,
        corpus: &Corpus,
        options: &RunOptions,
    ) -> Result<Self, AblationError> {
        config.validate()?;
        let split = split_dataset(corpus, config.split_ratio, config.split_seed)?;
        // popularity is computed from the training projects only
        let table = PopularityTable::from_projects(&split.train);
        let mut backend_config = config.effective_backend();
        if backend_config.api_key.is_none() {
            backend_config.api_key = options.api_key.clone();
        }
        let backend = build_backend(&backend_config, &split.train, &table)?;
        let instructions =
            InstructionSet::new(&options.templates, table.top_popular(config.top_popular_k));
        Ok(Pipeline {
            strategy: config.strategy.to_strategy(),
            renderer: PromptRenderer::new(options.templates.clone(), config.max_prompt_chars),
            instructions,
            backend,
            transcripts: options
                .out_dir
                .as_ref()
                .map(|d| d.join(file_safe(&config.config_id))),
            table,
            split,
            config: config.clone(),
        })
    }

    pub fn test_cases(&self) -> (Vec<TestCase>, Vec<String>) {
        build_test_cases(
            &self.split.test,
            self.config.visible_fraction,
            self.config.split_seed,
        )
    }

    fn prompt_for(&self, case: &TestCase, history: &ConversationHistory) -> Result<String, PromptError> {
        let examples = if self.strategy.example_count > 0 {
            select_examples(
                &self.split.train,
                &case.visible,
                self.strategy.example_count,
                seed::derive(self.config.split_seed, "few-shot"),
                self.config.example_selection,
            )?
        } else {
            Vec::new()
        };
        self.renderer
            .render(&self.strategy, &case.visible, &examples, history, &self.instructions)
    }

    fn persist(&self, project_id: &str, prompt: &str, reply: &str) {
        let Some(dir) = &self.transcripts else {
            return;
        };
        let text = format!("### prompt\n{prompt}\n### reply\n{reply}\n");
        let path = dir.join(format!("{}.txt", file_safe(project_id)));
        if let Err(e) = write_file(&path, &text) {
            eprintln!("warning: {e}");
        }
    }

    /// Runs one session. Never fails: problems are recorded in the status
    /// and leave an empty recommendation list.
    pub fn run_session(&self, case: &TestCase, history: &ConversationHistory) -> SessionOutcome {
        let project_id = case.visible.project_id.clone();
        let outcome = |status, recommendations| SessionOutcome {
            project_id: project_id.clone(),
            visible: case.visible.dependencies.clone(),
            truth: case.truth.clone(),
            status,
            recommendations,
        };
        let empty = RecommendationList {
            project_id: project_id.clone(),
            ..Default::default()
        };
        let prompt = match self.prompt_for(case, history) {
            Ok(p) => p,
            Err(e) => return outcome(SessionStatus::PromptFailed(e.to_string()), empty),
        };
        let session = Session {
            prompt: &prompt,
            target: &case.visible,
            n: self.config.candidate_count(),
        };
        let reply = match self.backend.complete(&session) {
            Ok(r) => r,
            Err(e) => return outcome(SessionStatus::BackendFailed(e.to_string()), empty),
        };
        self.persist(&project_id, &prompt, &reply);
        let mut list = parse_maven_list(&reply, self.config.backend.strict_parse);
        list.project_id = project_id.clone();
        if list.parse_warning {
            return outcome(SessionStatus::ParseFailed, list);
        }
        let list = apply_penalty(&list, &self.table, &self.config.penalty);
        outcome(SessionStatus::Parsed, list)
    }

    /// Runs every case. History prompts depend on earlier replies and run in
    /// order; everything else runs on up to `max_in_flight` threads. Output
    /// order always matches `cases`.
    pub fn run_sessions(&self, cases: &[TestCase]) -> Vec<SessionOutcome> {
        if self.strategy.kind == StrategyKind::FewShotHistory {
            let mut history = ConversationHistory::default();
            return cases
                .iter()
                .map(|case| {
                    let out = self.run_session(case, &history);
                    let reply = render_maven_list(out.recommendations.items.iter().map(|i| &i.coordinate));
                    history.push_exchange(render_target(&case.visible), reply.trim_end());
                    history.truncate_to_last(self.config.history_window);
                    out
                })
                .collect();
        }
        let workers = self.config.backend.max_in_flight.clamp(1, cases.len().max(1));
        let next = AtomicUsize::new(0);
        let slots: Mutex<Vec<Option<SessionOutcome>>> = Mutex::new(vec![None; cases.len()]);
        let empty = ConversationHistory::default();
        thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(case) = cases.get(i) else { break };
                    let out = self.run_session(case, &empty);
                    slots.lock().unwrap()[i] = Some(out);
                });
            }
        });
        slots
            .into_inner()
            .unwrap()
            .into_iter()
            .map(|o| o.expect("every slot filled"))
            .collect()
    }
}

/// Scores session outcomes. Failed sessions count as empty lists.
pub fn evaluate_sessions(
    outcomes: &[SessionOutcome],
    table: &PopularityTable,
    corpus: &Corpus,
    config: &ExperimentConfig,
) -> Result<MetricsReport, MetricsError> {
    let recs: BTreeMap<String, RecommendationList> = outcomes
        .iter()
        .map(|o| (o.project_id.clone(), o.recommendations.clone()))
        .collect();
    let truth: GroundTruth = outcomes
        .iter()
        .map(|o| (o.project_id.clone(), o.truth.clone()))
        .collect();
    evaluate_all(&recs, &truth, table, corpus.catalog(), &config.eval)
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

pub fn run_experiment(
    config: &ExperimentConfig,
    corpus: &Corpus,
    options: &RunOptions,
) -> Result<RunResult, AblationError> {
    let started = now();
    let pipeline = Pipeline::new(config, corpus, options)?;
    let (cases, excluded) = pipeline.test_cases();
    if cases.is_empty() {
        return Err(AblationError::EmptyTestSplit);
    }
    let outcomes = pipeline.run_sessions(&cases);
    let report = evaluate_sessions(&outcomes, &pipeline.table, corpus, config)?;

    let mut sessions: Vec<SessionLog> = outcomes
        .iter()
        .map(|o| SessionLog {
            project_id: o.project_id.clone(),
            status: o.status.clone(),
            items: o.recommendations.len(),
        })
        .collect();
    sessions.extend(excluded.into_iter().map(|id| SessionLog {
        project_id: id,
        status: SessionStatus::Excluded("no dependencies to hold out".into()),
        items: 0,
    }));
    let sessions_total = outcomes.len();
    let sessions_failed = outcomes.iter().filter(|o| o.status.is_failure()).count();
    let backend_errors = outcomes
        .iter()
        .filter(|o| matches!(o.status, SessionStatus::BackendFailed(_)))
        .count();
    let status = if backend_errors * 2 > sessions_total {
        RunStatus::Failed
    } else {
        RunStatus::Completed
    };

    Ok(RunResult {
        config_id: config.config_id.clone(),
        status,
        report,
        sessions_total,
        sessions_parsed: sessions_total - sessions_failed,
        sessions_failed,
        backend_errors,
        sessions,
        train_size: pipeline.split.train.len(),
        test_size: pipeline.split.test.len(),
        catalog_size: corpus.catalog().len(),
        transcripts_path: pipeline
            .transcripts
            .as_ref()
            .map(|p| p.display().to_string()),
        started,
        finished: now(),
    })
}

/// Outcome of one matrix row: a result, or the error that stopped it.
#[derive(Debug)]
pub struct MatrixEntry {
    pub config_id: String,
    pub outcome: Result<RunResult, AblationError>,
}

/// Runs configurations in declared order. Duplicate ids are rejected before
/// anything runs; a failing row does not stop the others.
pub fn run_matrix(
    configs: &[ExperimentConfig],
    corpus: &Corpus,
    options: &RunOptions,
) -> Result<Vec<MatrixEntry>, AblationError> {
    config::check_unique_ids(configs)?;
    Ok(configs
        .iter()
        .map(|c| MatrixEntry {
            config_id: c.config_id.clone(),
            outcome: run_experiment(c, corpus, options),
        })
        .collect())
}

/// Combined CSV: one row per configuration; rows that errored have empty
/// metric fields.
pub fn combined_csv(entries: &[MatrixEntry]) -> String {
    let mut out = format!("{REPORT_CSV_HEADER}\n");
    for e in entries {
        match &e.outcome {
            Ok(r) => out.push_str(&r.report.csv_row(&e.config_id)),
            Err(_) => out.push_str(&format!("{},,,,,", e.config_id)),
        }
        out.push('\n');
    }
    out
}

/// Plain-text table in the usual results layout.
pub fn render_table(entries: &[MatrixEntry]) -> String {
    let n = entries
        .iter()
        .find_map(|e| e.outcome.as_ref().ok().map(|r| r.report.n));
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<14} | {:>6} | {:>6} | {:>6} | {:>10} | {:>6}",
        "Configuration", "PR@N", "REC@N", "F1", "Coverage@N", "EPC"
    );
    let _ = writeln!(out, "{}", "-".repeat(66));
    for e in entries {
        match &e.outcome {
            Ok(r) => {
                let m = &r.report;
                let _ = writeln!(
                    out,
                    "{:<14} | {:>6.2} | {:>6.2} | {:>6.2} | {:>9.1}% | {:>5.1}%",
                    e.config_id,
                    m.precision,
                    m.recall,
                    m.f1,
                    m.coverage * 100.0,
                    m.epc * 100.0
                );
            }
            Err(err) => {
                let _ = writeln!(out, "{:<14} | failed: {err}", e.config_id);
            }
        }
    }
    if let Some(n) = n {
        let _ = writeln!(out, "N = {n}");
    }
    out
}

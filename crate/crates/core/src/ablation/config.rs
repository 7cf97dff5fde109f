use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::AblationError;
use crate::backend::BackendConfig;
use crate::corpus::{DEFAULT_SPLIT_RATIO, DEFAULT_TOP_K};
use crate::metrics::EvalParams;
use crate::prompting::{
    ExampleSelection, PromptStrategy, StrategyKind, DEFAULT_EXAMPLE_COUNT,
    DEFAULT_MAX_PROMPT_CHARS,
};
use crate::rerank::PenaltyParams;

pub const DEFAULT_SPLIT_SEED: u64 = 42;
pub const DEFAULT_VISIBLE_FRACTION: f64 = 0.5;
pub const DEFAULT_HISTORY_WINDOW: usize = 2;

const DEFAULT_MATRIX: &str = include_str!("../../assets/matrix.default.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    #[serde(default = "default_examples")]
    pub examples: usize,
}

fn default_examples() -> usize {
    DEFAULT_EXAMPLE_COUNT
}

impl StrategyConfig {
    pub fn to_strategy(self) -> PromptStrategy {
        PromptStrategy::of_kind(self.kind, self.examples)
    }
}

/// One row of the experiment matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub config_id: String,
    #[serde(default)]
    pub backend: BackendConfig,
    pub strategy: StrategyConfig,
    #[serde(default)]
    pub penalty: PenaltyParams,
    #[serde(default)]
    pub eval: EvalParams,
    #[serde(default = "default_seed")]
    pub split_seed: u64,
    #[serde(default = "default_ratio")]
    pub split_ratio: f64,
    #[serde(default = "default_top_k")]
    pub top_popular_k: usize,
    /// Informational: selects the fine-tuned model name at the backend.
    #[serde(default)]
    pub finetuned_model: bool,
    /// Share of each test project's dependencies shown to the recommender;
    /// the rest is ground truth.
    #[serde(default = "default_visible")]
    pub visible_fraction: f64,
    #[serde(default)]
    pub example_selection: ExampleSelection,
    #[serde(default = "default_max_prompt")]
    pub max_prompt_chars: usize,
    /// Human/AI exchanges kept for few-shot-history prompts.
    #[serde(default = "default_history_window")]
    pub history_window: usize,
    /// Items requested per session; defaults to the evaluation cutoff.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<usize>,
}

fn default_seed() -> u64 {
    DEFAULT_SPLIT_SEED
}
fn default_ratio() -> f64 {
    DEFAULT_SPLIT_RATIO
}
fn default_top_k() -> usize {
    DEFAULT_TOP_K
}
fn default_visible() -> f64 {
    DEFAULT_VISIBLE_FRACTION
}
fn default_max_prompt() -> usize {
    DEFAULT_MAX_PROMPT_CHARS
}
fn default_history_window() -> usize {
    DEFAULT_HISTORY_WINDOW
}

impl ExperimentConfig {
    pub fn new(config_id: impl Into<String>, backend: BackendConfig, strategy: PromptStrategy) -> Self {
        ExperimentConfig {
            config_id: config_id.into(),
            backend,
            strategy: StrategyConfig {
                kind: strategy.kind,
                examples: strategy.example_count,
            },
            penalty: PenaltyParams::default(),
            eval: EvalParams::default(),
            split_seed: DEFAULT_SPLIT_SEED,
            split_ratio: DEFAULT_SPLIT_RATIO,
            top_popular_k: DEFAULT_TOP_K,
            finetuned_model: false,
            visible_fraction: DEFAULT_VISIBLE_FRACTION,
            example_selection: ExampleSelection::Overlap,
            max_prompt_chars: DEFAULT_MAX_PROMPT_CHARS,
            history_window: DEFAULT_HISTORY_WINDOW,
            candidates: None,
        }
    }

    pub fn with_penalty(mut self, penalty: PenaltyParams) -> Self {
        self.penalty = penalty;
        self
    }

    pub fn candidate_count(&self) -> usize {
        self.candidates.unwrap_or(self.eval.n)
    }

    /// Backend settings with the fine-tune flag applied.
    pub fn effective_backend(&self) -> BackendConfig {
        BackendConfig {
            use_finetuned: self.finetuned_model,
            ..self.backend.clone()
        }
    }

    pub fn validate(&self) -> Result<(), AblationError> {
        let bad = |msg: String| Err(AblationError::Config(format!("{}: {msg}", self.config_id)));
        if self.config_id.trim().is_empty() {
            return Err(AblationError::Config("empty config_id".into()));
        }
        if self.eval.n == 0 {
            return bad("eval.n must be at least 1".into());
        }
        if !(self.visible_fraction >= 0.0 && self.visible_fraction < 1.0) {
            return bad(format!("visible_fraction must lie in [0, 1), got {}", self.visible_fraction));
        }
        if !self.penalty.is_valid() {
            return bad(format!("penalty lambda must be finite and >= 0, got {}", self.penalty.lambda));
        }
        if self.candidate_count() == 0 {
            return bad("candidates must be at least 1".into());
        }
        self.strategy.to_strategy().validate()?;
        self.effective_backend().validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixFile {
    pub configs: Vec<ExperimentConfig>,
}

pub fn parse_matrix(json: &str) -> Result<Vec<ExperimentConfig>, AblationError> {
    let file: MatrixFile = serde_json::from_str(json)
        .map_err(|e| AblationError::Config(format!("matrix file: {e}")))?;
    Ok(file.configs)
}

pub fn load_matrix(path: &Path) -> Result<Vec<ExperimentConfig>, AblationError> {
    let text = fs::read_to_string(path).map_err(|source| AblationError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_matrix(&text)
}

/// The bundled six-configuration matrix (C1-C6) running on mock backends.
pub fn default_matrix() -> Vec<ExperimentConfig> {
    parse_matrix(DEFAULT_MATRIX).expect("bundled matrix parses")
}

pub fn default_matrix_json() -> &'static str {
    DEFAULT_MATRIX
}

pub(crate) fn check_unique_ids(configs: &[ExperimentConfig]) -> Result<(), AblationError> {
    let mut seen = HashSet::new();
    for c in configs {
        if !seen.insert(c.config_id.as_str()) {
            return Err(AblationError::Config(format!("duplicate config_id {:?}", c.config_id)));
        }
    }
    Ok(())
}

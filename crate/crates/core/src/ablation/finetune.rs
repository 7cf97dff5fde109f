//! Fine-tuning dataset export: prompt/completion pairs built from training
//! projects with part of their dependencies masked, plus a manifest of the
//! training hyperparameters.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{session::hold_out, write_file, AblationError};
use crate::backend::render_maven_list;
use crate::corpus::{DatasetSplit, LibraryCoordinate, PopularityTable, DEFAULT_TOP_K};
use crate::prompting::{
    select_examples, ConversationHistory, ExampleSelection, FewShotExample, InstructionSet,
    PromptRenderer, PromptStrategy, PromptTemplates, DEFAULT_EXAMPLE_COUNT,
    DEFAULT_MAX_PROMPT_CHARS,
};
use crate::seed;

pub const FINETUNE_FILE: &str = "finetune.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinetuneRecord {
    pub prompt: String,
    pub completion: String,
}

#[derive(Debug, Clone)]
pub struct FinetuneOptions {
    pub mask_fraction: f64,
    pub seed: u64,
    pub example_count: usize,
    pub top_popular_k: usize,
    pub max_prompt_chars: usize,
    pub templates: PromptTemplates,
}

impl Default for FinetuneOptions {
    fn default() -> Self {
        FinetuneOptions {
            mask_fraction: 0.5,
            seed: 42,
            example_count: DEFAULT_EXAMPLE_COUNT,
            top_popular_k: DEFAULT_TOP_K,
            max_prompt_chars: DEFAULT_MAX_PROMPT_CHARS,
            templates: PromptTemplates::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingParams {
    pub train_batch_size: usize,
    pub eval_batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub gradient_accumulation_steps: usize,
    pub optimizer: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoraParams {
    pub r: usize,
    pub alpha: usize,
    pub dropout: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizationParams {
    pub bits: u8,
    pub library: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub file: String,
    pub records: usize,
    pub mask_fraction: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneManifest {
    pub training: TrainingParams,
    pub lora: LoraParams,
    pub quantization: QuantizationParams,
    pub max_sequence_length: usize,
    pub dataset: DatasetInfo,
}

impl FinetuneManifest {
    pub fn new(records: usize, mask_fraction: f64, seed: u64) -> Self {
        FinetuneManifest {
            training: TrainingParams {
                train_batch_size: 4,
                eval_batch_size: 4,
                epochs: 3,
                learning_rate: 2e-5,
                weight_decay: 0.01,
                gradient_accumulation_steps: 1,
                optimizer: "PagedAdamW (8-bit)".into(),
            },
            lora: LoraParams {
                r: 16,
                alpha: 32,
                dropout: 0.05,
            },
            quantization: QuantizationParams {
                bits: 4,
                library: "bitsandbytes".into(),
            },
            max_sequence_length: 512,
            dataset: DatasetInfo {
                file: FINETUNE_FILE.into(),
                records,
                mask_fraction,
                seed,
            },
        }
    }
}

/// `ceil(fraction * d)` clamped so both sides stay non-empty.
pub(crate) fn masked_count(deps: usize, fraction: f64) -> usize {
    ((fraction * deps as f64).ceil() as usize).clamp(1, deps.saturating_sub(1).max(1))
}

/// Coordinates from `masked` that appear as whole tokens in `prompt`.
pub fn leaked_coordinates(prompt: &str, masked: &BTreeSet<LibraryCoordinate>) -> Vec<LibraryCoordinate> {
    let tokens: BTreeSet<&str> = prompt
        .split(|c: char| c.is_whitespace() || c == ',')
        .map(|t| t.trim_end_matches('.'))
        .filter(|t| !t.is_empty())
        .collect();
    masked
        .iter()
        .filter(|c| tokens.contains(c.as_str()))
        .cloned()
        .collect()
}

fn scrub(example: FewShotExample, masked: &BTreeSet<LibraryCoordinate>) -> FewShotExample {
    FewShotExample {
        dependencies: example
            .dependencies
            .into_iter()
            .filter(|c| !masked.contains(c))
            .collect(),
        ..example
    }
}

/// Builds one record per training project with at least two dependencies.
/// Masked coordinates are also dropped from the example blocks and the
/// avoid-list, so the completion never shows up in its own prompt.
pub fn build_finetune_records(
    split: &DatasetSplit,
    options: &FinetuneOptions,
) -> Result<Vec<FinetuneRecord>, AblationError> {
    if !(options.mask_fraction > 0.0 && options.mask_fraction < 1.0) {
        return Err(AblationError::Config(format!(
            "mask fraction must be in (0, 1), got {}",
            options.mask_fraction
        )));
    }
    if split.train.is_empty() {
        return Err(AblationError::Export("training split is empty".into()));
    }
    let table = PopularityTable::from_projects(&split.train);
    let popular = table.top_popular(options.top_popular_k);
    let renderer = PromptRenderer::new(options.templates.clone(), options.max_prompt_chars);
    let history = ConversationHistory::default();
    let example_seed = seed::derive(options.seed, "finetune/examples");

    let mut records = Vec::new();
    for project in split.train.iter().filter(|p| p.dependencies.len() >= 2) {
        let d = project.dependencies.len();
        let (visible, masked) = hold_out(
            &project.dependencies,
            masked_count(d, options.mask_fraction),
            options.seed,
            &format!("mask/{}", project.project_id),
        );
        let target = project.with_dependencies(visible);
        let pool = split.train.len().saturating_sub(1);
        let examples: Vec<FewShotExample> = select_examples(
            &split.train,
            &target,
            options.example_count.min(pool),
            example_seed,
            ExampleSelection::Overlap,
        )
        .unwrap_or_default()
        .into_iter()
        .map(|e| scrub(e, &masked))
        .filter(|e| !e.dependencies.is_empty())
        .collect();
        let avoid = popular.iter().filter(|c| !masked.contains(c)).cloned().collect();
        let instructions = InstructionSet::new(&options.templates, avoid);
        let strategy = if examples.is_empty() {
            PromptStrategy::zero_shot()
        } else {
            PromptStrategy::few_shot(examples.len())
        };
        let prompt = renderer.render(&strategy, &target, &examples, &history, &instructions)?;
        debug_assert!(leaked_coordinates(&prompt, &masked).is_empty());
        records.push(FinetuneRecord {
            prompt,
            completion: render_maven_list(&masked),
        });
    }
    if records.is_empty() {
        return Err(AblationError::Export(
            "no training project has two or more dependencies".into(),
        ));
    }
    Ok(records)
}

/// Writes `finetune.jsonl` and `manifest.json` into `out`; returns the
/// number of records.
pub fn export_finetune_dataset(
    split: &DatasetSplit,
    options: &FinetuneOptions,
    out: &Path,
) -> Result<usize, AblationError> {
    let records = build_finetune_records(split, options)?;
    let mut jsonl = String::new();
    for r in &records {
        jsonl.push_str(&serde_json::to_string(r).expect("record serializes"));
        jsonl.push('\n');
    }
    write_file(&out.join(FINETUNE_FILE), &jsonl)?;
    let manifest = FinetuneManifest::new(records.len(), options.mask_fraction, options.seed);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_file(&out.join(MANIFEST_FILE), &(text + "\n"))?;
    Ok(records.len())
}

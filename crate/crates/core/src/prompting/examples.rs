use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{FewShotExample, PromptError};
use crate::corpus::ProjectRecord;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExampleSelection {
    /// Most shared dependencies first; seeded shuffle among ties.
    #[default]
    Overlap,
    /// Seeded uniform sample.
    Random,
}

/// Picks `n` few-shot examples from `train` for `target`.
///
/// Training projects without dependencies and the target itself are never
/// chosen.
pub fn select_examples(
    train: &[ProjectRecord],
    target: &ProjectRecord,
    n: usize,
    seed: u64,
    mode: ExampleSelection,
) -> Result<Vec<FewShotExample>, PromptError> {
    let mut pool: Vec<&ProjectRecord> = train
        .iter()
        .filter(|p| p.project_id != target.project_id && !p.dependencies.is_empty())
        .collect();
    if pool.len() < n {
        return Err(PromptError::NotEnoughExamples {
            wanted: n,
            available: pool.len(),
        });
    }
    pool.shuffle(&mut seed::rng_for(seed, &format!("examples/{}", target.project_id)));
    if mode == ExampleSelection::Overlap {
        pool.sort_by_key(|p| {
            std::cmp::Reverse(p.dependencies.intersection(&target.dependencies).count())
        });
    }
    Ok(pool.into_iter().take(n).map(FewShotExample::from_project).collect())
}

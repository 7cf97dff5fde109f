use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::backend::RecommendationList;
use crate::corpus::{LibraryCoordinate, ProjectRecord};
use crate::seed;

/// A test project split into the part the recommender sees and the part it
/// is scored against.
#[derive(Debug, Clone, PartialEq)]
pub struct TestCase {
    pub visible: ProjectRecord,
    pub truth: BTreeSet<LibraryCoordinate>,
}

/// Seeded split of `deps` into `(kept, held_out)` with exactly `held` items
/// held out.
pub fn hold_out(
    deps: &BTreeSet<LibraryCoordinate>,
    held: usize,
    seed: u64,
    label: &str,
) -> (BTreeSet<LibraryCoordinate>, BTreeSet<LibraryCoordinate>) {
    let mut order: Vec<&LibraryCoordinate> = deps.iter().collect();
    order.shuffle(&mut seed::rng_for(seed, label));
    let held = held.min(order.len());
    let out = order[..held].iter().map(|c| (*c).clone()).collect();
    let kept = order[held..].iter().map(|c| (*c).clone()).collect();
    (kept, out)
}

/// Number of dependencies left visible: `floor(fraction * d)`, but always
/// at least one held out.
pub fn visible_count(deps: usize, fraction: f64) -> usize {
    ((fraction * deps as f64).floor() as usize).min(deps.saturating_sub(1))
}

/// Builds test cases; projects without dependencies have no ground truth
/// and are returned separately by id.
pub fn build_test_cases(
    test: &[ProjectRecord],
    visible_fraction: f64,
    seed: u64,
) -> (Vec<TestCase>, Vec<String>) {
    let mut cases = Vec::new();
    let mut excluded = Vec::new();
    for p in test {
        if p.dependencies.is_empty() {
            excluded.push(p.project_id.clone());
            continue;
        }
        let d = p.dependencies.len();
        let held = d - visible_count(d, visible_fraction);
        let (visible, truth) =
            hold_out(&p.dependencies, held, seed, &format!("visible/{}", p.project_id));
        cases.push(TestCase {
            visible: p.with_dependencies(visible),
            truth,
        });
    }
    (cases, excluded)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "detail", rename_all = "kebab-case")]
pub enum SessionStatus {
    Parsed,
    /// The reply contained no coordinates.
    ParseFailed,
    BackendFailed(String),
    PromptFailed(String),
    /// No ground truth; not evaluated.
    Excluded(String),
}

impl SessionStatus {
    pub fn is_failure(&self) -> bool {
        matches!(
            self,
            SessionStatus::ParseFailed | SessionStatus::BackendFailed(_) | SessionStatus::PromptFailed(_)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionLog {
    pub project_id: String,
    #[serde(flatten)]
    pub status: SessionStatus,
    pub items: usize,
}

/// Everything one session produced. Failed sessions carry an empty list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionOutcome {
    pub project_id: String,
    pub visible: BTreeSet<LibraryCoordinate>,
    pub truth: BTreeSet<LibraryCoordinate>,
    pub status: SessionStatus,
    pub recommendations: RecommendationList,
}

use std::collections::HashSet;

use rand::seq::SliceRandom;
use serde::Serialize;

use super::{Corpus, CorpusError, ProjectRecord};
use crate::seed;

pub const DEFAULT_SPLIT_RATIO: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetSplit {
    pub train: Vec<ProjectRecord>,
    pub test: Vec<ProjectRecord>,
    pub seed: u64,
    pub ratio: f64,
}

impl DatasetSplit {
    pub fn train_ids(&self) -> HashSet<&str> {
        self.train.iter().map(|p| p.project_id.as_str()).collect()
    }

    pub fn test_ids(&self) -> HashSet<&str> {
        self.test.iter().map(|p| p.project_id.as_str()).collect()
    }
}

/// Train size for `n` projects: `ratio * n` rounded half-up.
pub(crate) fn train_size(ratio: f64, n: usize) -> usize {
    ((ratio * n as f64) + 0.5).floor() as usize
}

/// Seeded shuffle of the corpus; the first `round(ratio * n)` projects form
/// the training set.
pub fn split_dataset(corpus: &Corpus, ratio: f64, seed: u64) -> Result<DatasetSplit, CorpusError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(CorpusError::InvalidRatio(ratio));
    }
    let n = corpus.len();
    if n < 2 {
        return Err(CorpusError::TooFewProjects(n));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng_for(seed, "split"));
    let cut = train_size(ratio, n).min(n);
    let pick = |idx: &[usize]| -> Vec<ProjectRecord> {
        idx.iter().map(|&i| corpus.projects()[i].clone()).collect()
    };
    Ok(DatasetSplit {
        train: pick(&order[..cut]),
        test: pick(&order[cut..]),
        seed,
        ratio,
    })
}

//! Popularity penalty and post-hoc re-ranking of recommendation lists.
//!
//! A library at popularity rank `r` (1 = most used) carries a penalty of
//! `1 / (r + 1)`. Re-ranking subtracts `lambda * penalty` from each item's
//! base score and sorts by the adjusted score, so that with equal base scores
//! the least popular libraries come first.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::RecommendationList;
use crate::corpus::PopularityTable;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RerankError {
    #[error("popularity rank must be at least 1, got {0}")]
    RankOutOfDomain(usize),
}

pub fn penalty_score(rank: usize) -> Result<f64, RerankError> {
    if rank < 1 {
        return Err(RerankError::RankOutOfDomain(rank));
    }
    Ok(1.0 / (rank as f64 + 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PenaltyParams {
    pub lambda: f64,
    pub enabled: bool,
}

impl Default for PenaltyParams {
    fn default() -> Self {
        PenaltyParams {
            lambda: 1.0,
            enabled: false,
        }
    }
}

impl PenaltyParams {
    pub fn enabled(lambda: f64) -> Self {
        PenaltyParams {
            lambda,
            enabled: true,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.lambda.is_finite() && self.lambda >= 0.0
    }
}

/// Re-ranks `list` by `base_score - lambda * penalty(rank)`.
///
/// Coordinates absent from `table` get the rank one past the tail. Ties keep
/// their incoming order. Base scores are preserved; the adjusted score is
/// stored next to them and positions are renumbered from 1. A disabled
/// `params` returns the list unchanged.
pub fn apply_penalty(
    list: &RecommendationList,
    table: &PopularityTable,
    params: &PenaltyParams,
) -> RecommendationList {
    if !params.enabled {
        return list.clone();
    }
    let mut items = list.items.clone();
    for item in &mut items {
        let rank = table.rank_or_tail(&item.coordinate);
        let penalty = penalty_score(rank).expect("table ranks are 1-based");
        item.adjusted_score = Some(item.base_score - params.lambda * penalty);
    }
    items.sort_by(|a, b| {
        let (a, b) = (a.adjusted_score.unwrap(), b.adjusted_score.unwrap());
        b.total_cmp(&a)
    });
    for (i, item) in items.iter_mut().enumerate() {
        item.position = i + 1;
    }
    RecommendationList {
        items,
        ..list.clone()
    }
}

//! Offline recommenders that stand in for a language model.

use std::collections::{BTreeMap, BTreeSet};

use super::{RecommendationList, RecommendedItem};
use crate::corpus::{LibraryCoordinate, PopularityTable, ProjectRecord};

/// The `n` most popular libraries the target does not already use, scored
/// 1.0, 0.9, 0.8, ... (floored at zero).
pub fn mock_popularity_recommend(
    table: &PopularityTable,
    target: &ProjectRecord,
    n: usize,
) -> RecommendationList {
    let items = table
        .entries()
        .iter()
        .filter(|e| !target.dependencies.contains(&e.coordinate))
        .take(n)
        .enumerate()
        .map(|(i, e)| {
            let score = (1.0 - 0.1 * i as f64).max(0.0);
            RecommendedItem::new(e.coordinate.clone(), i + 1, score)
        });
    RecommendationList::from_items(target.project_id.clone(), items)
}

fn jaccard(a: &BTreeSet<LibraryCoordinate>, b: &BTreeSet<LibraryCoordinate>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Neighbourhood voting: every training project votes for each of its
/// libraries the target lacks, with weight equal to the Jaccard similarity of
/// the two dependency sets. Ties go to the lexicographically smaller
/// coordinate; scores are normalized by the best one.
pub fn mock_cooccurrence_recommend(
    train: &[ProjectRecord],
    target: &ProjectRecord,
    n: usize,
) -> RecommendationList {
    let mut scores: BTreeMap<&LibraryCoordinate, f64> = BTreeMap::new();
    for q in train.iter().filter(|q| q.project_id != target.project_id) {
        let sim = jaccard(&target.dependencies, &q.dependencies);
        for lib in q.dependencies.difference(&target.dependencies) {
            *scores.entry(lib).or_default() += sim;
        }
    }
    let mut ranked: Vec<(&LibraryCoordinate, f64)> = scores.into_iter().collect();
    // stable: equal scores stay in lexicographic order
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    ranked.truncate(n);
    let best = ranked.first().map_or(0.0, |r| r.1);
    let items = ranked.into_iter().enumerate().map(|(i, (c, s))| {
        let norm = if best > 0.0 { s / best } else { 0.0 };
        RecommendedItem::new(c.clone(), i + 1, norm)
    });
    RecommendationList::from_items(target.project_id.clone(), items)
}

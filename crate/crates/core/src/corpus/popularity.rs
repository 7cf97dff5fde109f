use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::Serialize;

use super::{Corpus, LibraryCoordinate, ProjectRecord};
use crate::rerank::penalty_score;

/// Size of the avoid-list handed to the prompt.
pub const DEFAULT_TOP_K: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PopularityEntry {
    pub coordinate: LibraryCoordinate,
    pub usage_count: usize,
    /// 1 = most used.
    pub rank: usize,
    pub penalty: f64,
}

/// Usage counts and dense 1-based ranks for every library of a project set.
///
/// Entries are stored in rank order. Equal usage counts are ranked by
/// ascending canonical coordinate.
#[derive(Debug, Clone, Default)]
pub struct PopularityTable {
    entries: Vec<PopularityEntry>,
    index: HashMap<LibraryCoordinate, usize>,
}

impl PopularityTable {
    pub fn from_projects(projects: &[ProjectRecord]) -> Self {
        let mut counts: BTreeMap<&LibraryCoordinate, usize> = BTreeMap::new();
        for p in projects {
            for dep in &p.dependencies {
                *counts.entry(dep).or_default() += 1;
            }
        }
        let mut ordered: Vec<(&LibraryCoordinate, usize)> = counts.into_iter().collect();
        // BTreeMap iteration is already lexicographic; a stable sort keeps that for ties
        ordered.sort_by_key(|e| std::cmp::Reverse(e.1));

        let entries: Vec<PopularityEntry> = ordered
            .into_iter()
            .enumerate()
            .map(|(i, (coordinate, usage_count))| PopularityEntry {
                coordinate: coordinate.clone(),
                usage_count,
                rank: i + 1,
                penalty: penalty_score(i + 1).expect("ranks start at 1"),
            })
            .collect();
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.coordinate.clone(), i))
            .collect();
        PopularityTable { entries, index }
    }

    pub fn entries(&self) -> &[PopularityEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, coordinate: &LibraryCoordinate) -> Option<&PopularityEntry> {
        self.index.get(coordinate).map(|&i| &self.entries[i])
    }

    pub fn rank(&self, coordinate: &LibraryCoordinate) -> Option<usize> {
        self.get(coordinate).map(|e| e.rank)
    }

    /// Rank used for coordinates missing from the table: one past the tail.
    pub fn absent_rank(&self) -> usize {
        self.entries.len() + 1
    }

    pub fn rank_or_tail(&self, coordinate: &LibraryCoordinate) -> usize {
        self.rank(coordinate).unwrap_or_else(|| self.absent_rank())
    }

    pub fn usage_count(&self, coordinate: &LibraryCoordinate) -> usize {
        self.get(coordinate).map_or(0, |e| e.usage_count)
    }

    /// The `k` most popular coordinates in rank order (all of them if `k`
    /// exceeds the table size).
    pub fn top_popular(&self, k: usize) -> Vec<LibraryCoordinate> {
        self.entries
            .iter()
            .take(k)
            .map(|e| e.coordinate.clone())
            .collect()
    }

    /// CSV with header `coordinate,usage_count,rank,penalty`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("coordinate,usage_count,rank,penalty\n");
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{},{},{},{:.6}",
                e.coordinate, e.usage_count, e.rank, e.penalty
            );
        }
        out
    }
}

pub fn compute_popularity(corpus: &Corpus) -> PopularityTable {
    PopularityTable::from_projects(corpus.projects())
}

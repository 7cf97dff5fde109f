//! Accuracy, coverage and novelty measures over top-N recommendation lists.
//!
//! | metric    | per project                  | aggregate                  |
//! |-----------|------------------------------|----------------------------|
//! | precision | hits / items recommended     | macro mean                 |
//! | recall    | hits / ground-truth size     | macro mean                 |
//! | f1        |                              | from the macro means       |
//! | coverage  |                              | distinct catalog items / L |
//! | epc       | rank-discounted, popularity-weighted hits | pooled ratio  |

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::RecommendationList;
use crate::corpus::{LibraryCoordinate, PopularityTable};

pub const DEFAULT_CUTOFF: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("ground truth for project {0:?} is empty")]
    EmptyTruth(String),
    #[error("recommendations and ground truth cover different projects (only in recommendations: {only_recs:?}, only in truth: {only_truth:?})")]
    MismatchedProjects {
        only_recs: Vec<String>,
        only_truth: Vec<String>,
    },
    #[error("nothing to evaluate")]
    NoProjects,
    #[error("cutoff N must be at least 1")]
    ZeroCutoff,
}

/// What stands in for "popularity" inside the novelty weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PopularitySource {
    #[default]
    UsageCount,
    Rank,
}

impl fmt::Display for PopularitySource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PopularitySource::UsageCount => "usage-count",
            PopularitySource::Rank => "rank",
        })
    }
}

impl FromStr for PopularitySource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "usage-count" => Ok(PopularitySource::UsageCount),
            "rank" => Ok(PopularitySource::Rank),
            other => Err(format!("unknown popularity source {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalParams {
    pub n: usize,
    pub epc_popularity_source: PopularitySource,
}

impl Default for EvalParams {
    fn default() -> Self {
        EvalParams {
            n: DEFAULT_CUTOFF,
            epc_popularity_source: PopularitySource::UsageCount,
        }
    }
}

impl EvalParams {
    pub fn at(n: usize) -> Self {
        EvalParams {
            n,
            ..Default::default()
        }
    }
}

/// Held-out dependencies per project id.
pub type GroundTruth = BTreeMap<String, BTreeSet<LibraryCoordinate>>;

fn hits(rec: &RecommendationList, truth: &BTreeSet<LibraryCoordinate>, n: usize) -> usize {
    rec.top_n(n)
        .iter()
        .filter(|i| truth.contains(&i.coordinate))
        .count()
}

/// Relevant items in the top `n` over the number actually recommended
/// there (`min(n, |rec|)`). Zero for an empty list.
pub fn precision_at_n(
    rec: &RecommendationList,
    truth: &BTreeSet<LibraryCoordinate>,
    params: &EvalParams,
) -> f64 {
    let shown = rec.top_n(params.n).len();
    if shown == 0 {
        return 0.0;
    }
    hits(rec, truth, params.n) as f64 / shown as f64
}

pub fn recall_at_n(
    rec: &RecommendationList,
    truth: &BTreeSet<LibraryCoordinate>,
    params: &EvalParams,
) -> Result<f64, MetricsError> {
    if truth.is_empty() {
        return Err(MetricsError::EmptyTruth(rec.project_id.clone()));
    }
    Ok(hits(rec, truth, params.n) as f64 / truth.len() as f64)
}

pub fn f1(precision: f64, recall: f64) -> f64 {
    let sum = precision + recall;
    if sum == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / sum
    }
}

/// Share of `catalog` that appears in at least one top-`n` list.
/// Recommendations outside the catalog do not count.
pub fn coverage_at_n<'a>(
    recs: impl IntoIterator<Item = &'a RecommendationList>,
    catalog: &BTreeSet<LibraryCoordinate>,
    params: &EvalParams,
) -> f64 {
    if catalog.is_empty() {
        return 0.0;
    }
    let covered: HashSet<&LibraryCoordinate> = recs
        .into_iter()
        .flat_map(|r| r.top_n(params.n))
        .map(|i| &i.coordinate)
        .filter(|c| catalog.contains(*c))
        .collect();
    covered.len() as f64 / catalog.len() as f64
}

fn popularity_of(table: &PopularityTable, c: &LibraryCoordinate, source: PopularitySource) -> f64 {
    let raw = match source {
        PopularitySource::UsageCount => table.usage_count(c),
        PopularitySource::Rank => table.rank_or_tail(c),
    };
    raw.max(1) as f64
}

/// Expected popularity complement: relevant hits weighted by
/// `1 / (1 + log2(pop))` and discounted by `1 / log2(r + 1)`, normalized by
/// the same sum without the popularity weight. Zero when nothing relevant
/// was recommended.
pub fn epc_at_n<'a>(
    recs: impl IntoIterator<Item = &'a RecommendationList>,
    truth: &GroundTruth,
    table: &PopularityTable,
    params: &EvalParams,
) -> f64 {
    let mut numerator = 0.0;
    let mut denominator = 0.0;
    for rec in recs {
        let Some(relevant) = truth.get(&rec.project_id) else {
            continue;
        };
        for item in rec.top_n(params.n) {
            if !relevant.contains(&item.coordinate) {
                continue;
            }
            let discount = 1.0 / (item.position as f64 + 1.0).log2();
            let pop = popularity_of(table, &item.coordinate, params.epc_popularity_source);
            numerator += discount / (1.0 + pop.log2());
            denominator += discount;
        }
    }
    if denominator == 0.0 {
        0.0
    } else {
        numerator / denominator
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectMetrics {
    pub precision: f64,
    pub recall: f64,
    pub hits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub coverage: f64,
    pub epc: f64,
    pub n: usize,
    pub epc_popularity_source: PopularitySource,
    pub per_project: BTreeMap<String, ProjectMetrics>,
}

pub const REPORT_CSV_HEADER: &str = "config_id,precision,recall,f1,coverage,epc";

impl MetricsReport {
    pub fn csv_row(&self, config_id: &str) -> String {
        format!(
            "{},{:.4},{:.4},{:.4},{:.4},{:.4}",
            config_id, self.precision, self.recall, self.f1, self.coverage, self.epc
        )
    }
}

/// Evaluates every project of `recs` against `truth`. The two must cover
/// exactly the same project ids.
pub fn evaluate_all(
    recs: &BTreeMap<String, RecommendationList>,
    truth: &GroundTruth,
    table: &PopularityTable,
    catalog: &BTreeSet<LibraryCoordinate>,
    params: &EvalParams,
) -> Result<MetricsReport, MetricsError> {
    if params.n == 0 {
        return Err(MetricsError::ZeroCutoff);
    }
    let only_recs: Vec<String> = recs.keys().filter(|k| !truth.contains_key(*k)).cloned().collect();
    let only_truth: Vec<String> = truth.keys().filter(|k| !recs.contains_key(*k)).cloned().collect();
    if !only_recs.is_empty() || !only_truth.is_empty() {
        return Err(MetricsError::MismatchedProjects {
            only_recs,
            only_truth,
        });
    }
    if recs.is_empty() {
        return Err(MetricsError::NoProjects);
    }

    let mut per_project = BTreeMap::new();
    for (id, rec) in recs {
        let relevant = &truth[id];
        let mut keyed = rec.clone();
        keyed.project_id = id.clone();
        let metrics = ProjectMetrics {
            precision: precision_at_n(&keyed, relevant, params),
            recall: recall_at_n(&keyed, relevant, params)?,
            hits: hits(&keyed, relevant, params.n),
        };
        per_project.insert(id.clone(), metrics);
    }
    let count = per_project.len() as f64;
    let precision = per_project.values().map(|m| m.precision).sum::<f64>() / count;
    let recall = per_project.values().map(|m| m.recall).sum::<f64>() / count;

    // EPC looks lists up by their project id; use the map keys
    let keyed: Vec<RecommendationList> = recs
        .iter()
        .map(|(id, r)| RecommendationList {
            project_id: id.clone(),
            ..r.clone()
        })
        .collect();

    Ok(MetricsReport {
        precision,
        recall,
        f1: f1(precision, recall),
        coverage: coverage_at_n(recs.values(), catalog, params),
        epc: epc_at_n(&keyed, truth, table, params),
        n: params.n,
        epc_popularity_source: params.epc_popularity_source,
        per_project,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::RecommendedItem;
    use crate::corpus::ProjectRecord;

    fn c(s: &str) -> LibraryCoordinate {
        LibraryCoordinate::parse(s).unwrap()
    }

    fn rec(id: &str, coords: &[&str]) -> RecommendationList {
        RecommendationList::from_items(
            id,
            coords.iter().map(|s| RecommendedItem::new(c(s), 0, 1.0)),
        )
    }

    fn set(coords: &[&str]) -> BTreeSet<LibraryCoordinate> {
        coords.iter().map(|s| c(s)).collect()
    }

    fn libs(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}:l{i}")).collect()
    }

    #[test]
    fn precision_examples() {
        let names = libs("g", 10);
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let r = rec("p", &refs);
        assert_eq!(precision_at_n(&r, &set(&refs[..4]), &EvalParams::at(10)), 0.4);
        assert_eq!(precision_at_n(&r, &set(&refs), &EvalParams::at(10)), 1.0);
        assert_eq!(precision_at_n(&rec("p", &[]), &set(&["a:a"]), &EvalParams::at(10)), 0.0);
        // denominator is what was actually shown
        assert_eq!(precision_at_n(&rec("p", &["a:a", "b:b"]), &set(&["a:a"]), &EvalParams::at(10)), 0.5);
    }

    #[test]
    fn recall_examples() {
        let truth = libs("t", 8);
        let truth_refs: Vec<&str> = truth.iter().map(String::as_str).collect();
        let r = rec("p", &[truth_refs[0], truth_refs[1], truth_refs[2], truth_refs[3], "x:x"]);
        assert_eq!(recall_at_n(&r, &set(&truth_refs), &EvalParams::at(10)).unwrap(), 0.5);
        assert_eq!(recall_at_n(&rec("p", &["x:x"]), &set(&truth_refs), &EvalParams::at(10)).unwrap(), 0.0);
        assert_eq!(recall_at_n(&rec("p", &["a:a", "b:b"]), &set(&["b:b"]), &EvalParams::at(10)).unwrap(), 1.0);
        assert!(matches!(
            recall_at_n(&r, &BTreeSet::new(), &EvalParams::at(10)),
            Err(MetricsError::EmptyTruth(_))
        ));
    }

    #[test]
    fn f1_examples() {
        assert_eq!((f1(0.47, 0.20) * 100.0).round() / 100.0, 0.28);
        let c1 = f1(0.12, 0.08);
        assert!((c1 - 0.096).abs() < 1e-12);
        assert_eq!(f1(0.0, 0.0), 0.0);
    }

    #[test]
    fn coverage_examples() {
        let catalog: BTreeSet<_> = libs("g", 10).iter().map(|s| c(s)).collect();
        let recs = [rec("1", &["g:l0", "g:l1"]), rec("2", &["g:l1", "g:l2"])];
        assert!((coverage_at_n(&recs, &catalog, &EvalParams::at(10)) - 0.3).abs() < 1e-12);
        let same = [rec("1", &["g:l0", "g:l1"]), rec("2", &["g:l0", "g:l1"])];
        assert!((coverage_at_n(&same, &catalog, &EvalParams::at(2)) - 0.2).abs() < 1e-12);
        assert_eq!(coverage_at_n(std::iter::empty(), &catalog, &EvalParams::at(10)), 0.0);
        // out-of-catalog items never count
        assert_eq!(coverage_at_n(&[rec("1", &["x:x"])], &catalog, &EvalParams::at(10)), 0.0);
    }

    fn usage_table(counts: &[(&str, usize)]) -> PopularityTable {
        let max = counts.iter().map(|c| c.1).max().unwrap_or(0);
        let projects: Vec<ProjectRecord> = (0..max)
            .map(|i| {
                ProjectRecord::new(
                    i.to_string(),
                    counts.iter().filter(|(_, n)| *n > i).map(|(s, _)| c(s)),
                )
            })
            .collect();
        PopularityTable::from_projects(&projects)
    }

    #[test]
    fn epc_worked_example() {
        // values frozen from an independent hand/python evaluation:
        // num = 1/(1+log2 3) + 1/log2 3, den = 1 + 1/log2 3
        let table = usage_table(&[("a:a", 3), ("b:b", 1)]);
        let truth: GroundTruth = [("p".to_string(), set(&["a:a", "b:b"]))].into();
        let r = rec("p", &["a:a", "b:b"]);
        let epc = epc_at_n([&r], &truth, &table, &EvalParams::at(2));
        assert!((epc - 0.6240505200038379).abs() < 1e-12, "{epc}");
    }

    #[test]
    fn epc_unit_popularity_and_no_hits() {
        let table = usage_table(&[("a:a", 1), ("b:b", 1)]);
        let truth: GroundTruth = [("p".to_string(), set(&["a:a", "b:b"]))].into();
        let r = rec("p", &["a:a", "x:x", "b:b"]);
        assert!((epc_at_n([&r], &truth, &table, &EvalParams::at(3)) - 1.0).abs() < 1e-12);
        let miss = rec("p", &["x:x"]);
        assert_eq!(epc_at_n([&miss], &truth, &table, &EvalParams::at(3)), 0.0);
    }

    #[test]
    fn epc_rank_source() {
        let table = usage_table(&[("a:a", 3), ("b:b", 1)]);
        let truth: GroundTruth = [("p".to_string(), set(&["b:b"]))].into();
        let r = rec("p", &["b:b"]);
        let params = EvalParams {
            n: 1,
            epc_popularity_source: PopularitySource::Rank,
        };
        // b:b is rank 2 -> 1 / (1 + log2 2)
        assert!((epc_at_n([&r], &truth, &table, &params) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn evaluate_all_macro_averages() {
        let table = usage_table(&[("a:a", 2), ("b:b", 1)]);
        let catalog = set(&["a:a", "b:b", "c:c", "d:d"]);
        let recs: BTreeMap<_, _> = [
            ("p1".to_string(), rec("p1", &["a:a", "x:x", "y:y", "z:z", "w:w"])),
            ("p2".to_string(), rec("p2", &["a:a", "b:b", "x:x", "y:y", "z:z"])),
        ]
        .into();
        let truth: GroundTruth = [
            ("p1".to_string(), set(&["a:a"])),
            ("p2".to_string(), set(&["a:a", "b:b"])),
        ]
        .into();
        let report = evaluate_all(&recs, &truth, &table, &catalog, &EvalParams::at(5)).unwrap();
        assert!((report.precision - 0.3).abs() < 1e-12);
        assert!((report.recall - 1.0).abs() < 1e-12);
        assert!((report.f1 - f1(0.3, 1.0)).abs() < 1e-12);
        assert!((report.coverage - 0.5).abs() < 1e-12);
        assert_eq!(report.per_project["p2"].hits, 2);
        // (0.5 + 0.5 + 1/log2 3) / (2 + 1/log2 3), computed independently
        assert!((report.epc - 0.6199062332840657).abs() < 1e-12);
        assert_eq!(report.csv_row("C1"), "C1,0.3000,1.0000,0.4615,0.5000,0.6199");
    }

    #[test]
    fn evaluate_all_rejects_mismatched_ids() {
        let recs: BTreeMap<_, _> = [("p1".to_string(), rec("p1", &["a:a"]))].into();
        let truth: GroundTruth = [("p2".to_string(), set(&["a:a"]))].into();
        let err = evaluate_all(&recs, &truth, &PopularityTable::default(), &set(&["a:a"]), &EvalParams::at(1))
            .unwrap_err();
        assert!(matches!(err, MetricsError::MismatchedProjects { .. }));
        let empty = evaluate_all(&BTreeMap::new(), &GroundTruth::new(), &PopularityTable::default(), &set(&["a:a"]), &EvalParams::at(1));
        assert_eq!(empty.unwrap_err(), MetricsError::NoProjects);
    }
}

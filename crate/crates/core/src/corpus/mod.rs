//! Project/dependency corpus: loading, popularity statistics, splitting and
//! README cleaning.

mod coordinate;
mod popularity;
mod readme;
mod split;

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use coordinate::{CoordinateError, LibraryCoordinate};
pub use popularity::{compute_popularity, PopularityEntry, PopularityTable, DEFAULT_TOP_K};
pub use readme::{clean_readme, readme_context, truncate_words, DEFAULT_MAX_CONTEXT_CHARS};
pub use split::{split_dataset, DatasetSplit, DEFAULT_SPLIT_RATIO};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Format(String),
    #[error("duplicate project id {0:?}")]
    DuplicateProject(String),
    #[error("cannot split {0} project(s): need at least 2")]
    TooFewProjects(usize),
    #[error("split ratio must lie strictly between 0 and 1, got {0}")]
    InvalidRatio(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectRecord {
    pub project_id: String,
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub readme_context: String,
    pub dependencies: BTreeSet<LibraryCoordinate>,
}

impl ProjectRecord {
    pub fn new(
        project_id: impl Into<String>,
        dependencies: impl IntoIterator<Item = LibraryCoordinate>,
    ) -> Self {
        let project_id = project_id.into();
        ProjectRecord {
            name: project_id.clone(),
            project_id,
            description: String::new(),
            readme_context: String::new(),
            dependencies: dependencies.into_iter().collect(),
        }
    }

    pub fn with_description(mut self, description: impl Into<String>) -> Self {
        self.description = description.into();
        self
    }

    /// Copy of this record with its dependency set replaced.
    pub fn with_dependencies(&self, dependencies: BTreeSet<LibraryCoordinate>) -> Self {
        ProjectRecord {
            dependencies,
            ..self.clone()
        }
    }
}

/// An ordered collection of projects plus the catalog of every library any
/// of them depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    projects: Vec<ProjectRecord>,
    catalog: BTreeSet<LibraryCoordinate>,
}

impl Corpus {
    pub fn new(projects: Vec<ProjectRecord>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::new();
        for p in &projects {
            if !seen.insert(p.project_id.as_str()) {
                return Err(CorpusError::DuplicateProject(p.project_id.clone()));
            }
        }
        let catalog = projects
            .iter()
            .flat_map(|p| p.dependencies.iter().cloned())
            .collect();
        Ok(Corpus { projects, catalog })
    }

    pub fn projects(&self) -> &[ProjectRecord] {
        &self.projects
    }

    pub fn catalog(&self) -> &BTreeSet<LibraryCoordinate> {
        &self.catalog
    }

    pub fn len(&self) -> usize {
        self.projects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projects.is_empty()
    }

    pub fn project(&self, id: &str) -> Option<&ProjectRecord> {
        self.projects.iter().find(|p| p.project_id == id)
    }

    pub fn to_tabular(&self) -> String {
        to_tabular(&self.projects)
    }

    pub fn to_jsonl(&self) -> String {
        self.projects
            .iter()
            .map(|p| serde_json::to_string(p).expect("project records serialize") + "\n")
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusFormat {
    /// `project_id TAB dep1,dep2,... TAB optional description`
    Tabular,
    /// One JSON object per line.
    RecordPerLine,
}

impl CorpusFormat {
    /// `.jsonl`/`.json` files are record-per-line; everything else is tabular.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") | Some("ndjson") => CorpusFormat::RecordPerLine,
            _ => CorpusFormat::Tabular,
        }
    }
}

impl FromStr for CorpusFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tabular" | "tsv" => Ok(CorpusFormat::Tabular),
            "record-per-line" | "jsonl" => Ok(CorpusFormat::RecordPerLine),
            other => Err(format!("unknown corpus format {other:?}")),
        }
    }
}

/// Dependency tokens dropped from one input line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineWarning {
    pub line: usize,
    pub skipped: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct LoadedCorpus {
    pub corpus: Corpus,
    pub warnings: Vec<LineWarning>,
    /// 1-based numbers of lines that produced no project at all.
    pub rejected_lines: Vec<usize>,
}

impl LoadedCorpus {
    /// Total number of skipped dependency tokens.
    pub fn warning_count(&self) -> usize {
        self.warnings.iter().map(|w| w.skipped.len()).sum()
    }
}

#[derive(Deserialize)]
struct RawRecord {
    project_id: String,
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    description: String,
    #[serde(default, alias = "readme_context")]
    readme: String,
    #[serde(default)]
    dependencies: Vec<String>,
}

fn parse_dependencies<'a>(
    tokens: impl Iterator<Item = &'a str>,
) -> (BTreeSet<LibraryCoordinate>, Vec<String>) {
    let mut deps = BTreeSet::new();
    let mut skipped = Vec::new();
    for tok in tokens.map(str::trim).filter(|t| !t.is_empty()) {
        match LibraryCoordinate::parse(tok) {
            Ok(c) => {
                deps.insert(c);
            }
            Err(_) => skipped.push(tok.to_string()),
        }
    }
    (deps, skipped)
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Parses corpus text. Blank lines and `#` comments are ignored.
pub fn parse_corpus(text: &str, format: CorpusFormat) -> Result<LoadedCorpus, CorpusError> {
    let mut projects = Vec::new();
    let mut warnings = Vec::new();
    let mut rejected: Vec<(usize, String)> = Vec::new();

    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let parsed = match format {
            CorpusFormat::Tabular => parse_tabular_line(line),
            CorpusFormat::RecordPerLine => parse_record_line(trimmed),
        };
        match parsed {
            Ok((record, skipped)) => {
                if !skipped.is_empty() {
                    warnings.push(LineWarning {
                        line: lineno,
                        skipped,
                    });
                }
                projects.push(record);
            }
            Err(reason) => rejected.push((lineno, reason)),
        }
    }

    if projects.is_empty() {
        return Err(CorpusError::Format(match rejected.first() {
            Some((line, reason)) => format!("no valid projects; first offending line {line}: {reason}"),
            None => "no valid projects: input is empty".to_string(),
        }));
    }
    Ok(LoadedCorpus {
        corpus: Corpus::new(projects)?,
        warnings,
        rejected_lines: rejected.into_iter().map(|(l, _)| l).collect(),
    })
}

fn parse_tabular_line(line: &str) -> Result<(ProjectRecord, Vec<String>), String> {
    let mut fields = line.splitn(3, '\t');
    let id = fields.next().unwrap_or("").trim();
    let deps = fields
        .next()
        .ok_or_else(|| "missing TAB-separated dependency field".to_string())?;
    if id.is_empty() {
        return Err("empty project id".to_string());
    }
    let description = fields.next().map(one_line).unwrap_or_default();
    let (dependencies, skipped) = parse_dependencies(deps.split(','));
    let record = ProjectRecord {
        project_id: id.to_string(),
        name: id.to_string(),
        description,
        readme_context: String::new(),
        dependencies,
    };
    Ok((record, skipped))
}

fn parse_record_line(line: &str) -> Result<(ProjectRecord, Vec<String>), String> {
    let raw: RawRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let id = raw.project_id.trim();
    if id.is_empty() {
        return Err("empty project id".to_string());
    }
    let (dependencies, skipped) = parse_dependencies(raw.dependencies.iter().map(String::as_str));
    let record = ProjectRecord {
        project_id: id.to_string(),
        name: raw.name.unwrap_or_else(|| id.to_string()),
        description: raw.description,
        readme_context: readme_context(&raw.readme, DEFAULT_MAX_CONTEXT_CHARS),
        dependencies,
    };
    Ok((record, skipped))
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<LoadedCorpus, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_corpus(&text, format)
}

/// Serializes projects in the tabular format. Names and README context are
/// not representable there and are dropped.
pub fn to_tabular(projects: &[ProjectRecord]) -> String {
    let mut out = String::new();
    for p in projects {
        let deps: Vec<&str> = p.dependencies.iter().map(|c| c.as_str()).collect();
        let _ = write!(out, "{}\t{}", p.project_id, deps.join(","));
        let description = one_line(&p.description);
        if !description.is_empty() {
            let _ = write!(out, "\t{description}");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn loads_tabular_lines() {
        let loaded = parse_corpus("p1\ta:x,b:y\np2\ta:x\n", CorpusFormat::Tabular).unwrap();
        assert_eq!(loaded.corpus.len(), 2);
        let catalog: Vec<_> = loaded.corpus.catalog().iter().map(|c| c.as_str()).collect();
        assert_eq!(catalog, ["a:x", "b:y"]);
        assert_eq!(loaded.warning_count(), 0);
    }

    #[test]
    fn empty_input_is_a_format_error() {
        let err = parse_corpus("", CorpusFormat::Tabular).unwrap_err();
        assert!(matches!(err, CorpusError::Format(_)));
    }

    #[test]
    fn format_error_names_first_offending_line() {
        let err = parse_corpus("# header\nno tab here\n\talso bad\n", CorpusFormat::Tabular)
            .unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn skips_bad_tokens_with_warning() {
        let loaded =
            parse_corpus("p1\ta:x,BadToken!!,b:y\tA project\n", CorpusFormat::Tabular).unwrap();
        let p = &loaded.corpus.projects()[0];
        assert_eq!(p.dependencies.len(), 2);
        assert_eq!(p.description, "A project");
        assert_eq!(loaded.warning_count(), 1);
        assert_eq!(loaded.warnings[0].line, 1);
    }

    #[test]
    fn ignores_comments_and_keeps_projects_without_dependencies() {
        let loaded = parse_corpus("# c\np1\t\np2\ta:x\n", CorpusFormat::Tabular).unwrap();
        assert_eq!(loaded.corpus.len(), 2);
        assert!(loaded.corpus.projects()[0].dependencies.is_empty());
    }

    #[test]
    fn rejects_duplicate_ids() {
        let err = parse_corpus("p1\ta:x\np1\tb:y\n", CorpusFormat::Tabular).unwrap_err();
        assert!(matches!(err, CorpusError::DuplicateProject(id) if id == "p1"));
    }

    #[test]
    fn record_per_line_cleans_readme() {
        let line = r#"{"project_id":"p","name":"Demo","dependencies":["a:x","nope"],"readme":"Fast `x` lib\nhttps://a.b 🚀"}"#;
        let loaded = parse_corpus(line, CorpusFormat::RecordPerLine).unwrap();
        let p = &loaded.corpus.projects()[0];
        assert_eq!(p.name, "Demo");
        assert_eq!(p.readme_context, "Fast lib");
        assert_eq!(loaded.warning_count(), 1);
    }

    #[test]
    fn unreadable_file_is_io_error() {
        let err = load_corpus(Path::new("/definitely/not/here.tsv"), CorpusFormat::Tabular)
            .unwrap_err();
        assert!(matches!(err, CorpusError::Io { .. }));
    }

    fn arb_projects() -> impl Strategy<Value = Vec<ProjectRecord>> {
        prop::collection::btree_map(
            "[a-z0-9]{1,6}",
            prop::collection::btree_set(("[a-z]{1,3}", "[a-z0-9-]{1,4}"), 0..5),
            1..8,
        )
        .prop_map(|m| {
            m.into_iter()
                .map(|(id, deps)| {
                    ProjectRecord::new(
                        id,
                        deps.into_iter()
                            .map(|(g, a)| LibraryCoordinate::new(&g, &a).unwrap()),
                    )
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn tabular_round_trip_preserves_projects(projects in arb_projects()) {
            let corpus = Corpus::new(projects).unwrap();
            let back = parse_corpus(&corpus.to_tabular(), CorpusFormat::Tabular).unwrap().corpus;
            prop_assert_eq!(back.projects(), corpus.projects());
            prop_assert_eq!(back.catalog(), corpus.catalog());
        }

        #[test]
        fn jsonl_round_trip_preserves_projects(projects in arb_projects()) {
            let corpus = Corpus::new(projects).unwrap();
            let back = parse_corpus(&corpus.to_jsonl(), CorpusFormat::RecordPerLine).unwrap().corpus;
            prop_assert_eq!(back.projects(), corpus.projects());
        }

        #[test]
        fn catalog_is_union_of_dependencies(projects in arb_projects()) {
            let corpus = Corpus::new(projects).unwrap();
            let union: BTreeSet<_> = corpus.projects().iter().flat_map(|p| p.dependencies.iter().cloned()).collect();
            prop_assert_eq!(corpus.catalog(), &union);
        }
    }
}

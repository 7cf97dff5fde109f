use std::collections::HashSet;
use std::fmt::Write as _;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::LibraryCoordinate;

/// Header line a well-formed model reply starts with.
pub const MAVEN_LIST_HEADER: &str = "Here is the list in Maven format:";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendedItem {
    pub coordinate: LibraryCoordinate,
    pub position: usize,
    pub base_score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adjusted_score: Option<f64>,
}

impl RecommendedItem {
    pub fn new(coordinate: LibraryCoordinate, position: usize, base_score: f64) -> Self {
        RecommendedItem {
            coordinate,
            position,
            base_score,
            adjusted_score: None,
        }
    }

    /// Score the list is ordered by: adjusted if re-ranked, base otherwise.
    pub fn score(&self) -> f64 {
        self.adjusted_score.unwrap_or(self.base_score)
    }
}

/// Ranked recommendations for one project.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RecommendationList {
    pub project_id: String,
    pub items: Vec<RecommendedItem>,
    #[serde(default)]
    pub raw_text: String,
    /// Set when the raw text contained no recognizable coordinate.
    #[serde(default)]
    pub parse_warning: bool,
}

impl RecommendationList {
    /// Builds a list from items, dropping repeated coordinates (first wins)
    /// and renumbering positions from 1.
    pub fn from_items(
        project_id: impl Into<String>,
        items: impl IntoIterator<Item = RecommendedItem>,
    ) -> Self {
        let mut seen = HashSet::new();
        let items = items
            .into_iter()
            .filter(|i| seen.insert(i.coordinate.clone()))
            .enumerate()
            .map(|(pos, item)| RecommendedItem {
                position: pos + 1,
                ..item
            })
            .collect();
        RecommendationList {
            project_id: project_id.into(),
            items,
            raw_text: String::new(),
            parse_warning: false,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn coordinates(&self) -> Vec<LibraryCoordinate> {
        self.items.iter().map(|i| i.coordinate.clone()).collect()
    }

    pub fn top_n(&self, n: usize) -> &[RecommendedItem] {
        &self.items[..n.min(self.items.len())]
    }
}

/// Renders coordinates as a numbered Maven list with the usual header.
pub fn render_maven_list<'a>(coordinates: impl IntoIterator<Item = &'a LibraryCoordinate>) -> String {
    let mut out = format!("{MAVEN_LIST_HEADER}\n\n");
    for (i, c) in coordinates.into_iter().enumerate() {
        let _ = writeln!(out, "{}: {}", i + 1, c);
    }
    out
}

fn permissive_line() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^(?:(?:[-*•]\s+)?\d+\s*[:.)\-]\s*|[-*•]\s+)?[`*]*([A-Za-z0-9_.\-]+:[A-Za-z0-9_.\-]+)[`*]*$")
            .unwrap()
    })
}

fn strict_line() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\d+: ([a-z0-9_.\-]+:[a-z0-9_.\-]+)$").unwrap())
}

/// Extracts coordinates from free-text model output.
///
/// Permissive mode accepts `k: g:a`, `k. g:a`, `k) g:a`, `k - g:a`, bullets
/// and bare `g:a` lines; strict mode only accepts `k: g:a`. Items get
/// `base_score = 1 / position`.
pub fn parse_maven_list(raw: &str, strict: bool) -> RecommendationList {
    let re = if strict { strict_line() } else { permissive_line() };
    let coords = raw.lines().filter_map(|line| {
        let caps = re.captures(line.trim())?;
        LibraryCoordinate::parse(&caps[1]).ok()
    });
    let mut list = RecommendationList::from_items(
        String::new(),
        coords.map(|c| RecommendedItem::new(c, 0, 0.0)),
    );
    for item in &mut list.items {
        item.base_score = 1.0 / item.position as f64;
    }
    list.raw_text = raw.to_string();
    list.parse_warning = list.items.is_empty();
    list
}

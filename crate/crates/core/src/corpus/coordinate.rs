use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoordinateError {
    #[error("expected 'groupId:artifactId', got {0:?}")]
    InvalidFormat(String),
    #[error("empty group id in {0:?}")]
    EmptyGroupId(String),
    #[error("empty artifact id in {0:?}")]
    EmptyArtifactId(String),
    #[error("illegal character in {0:?} (allowed: a-z 0-9 _ . -)")]
    IllegalCharacter(String),
}

/// A Maven `groupId:artifactId` pair in canonical lowercase form.
///
/// Ordering, equality and hashing all follow the canonical text, so sorting
/// coordinates sorts them lexicographically by `group:artifact`.
#[derive(Clone)]
pub struct LibraryCoordinate {
    canonical: String,
    colon: usize,
}

fn is_token(s: &str) -> bool {
    !s.is_empty()
        && s.bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || matches!(b, b'_' | b'.' | b'-'))
}

impl LibraryCoordinate {
    pub fn parse(input: &str) -> Result<Self, CoordinateError> {
        let normalized = input.trim().to_lowercase();
        let mut parts = normalized.split(':');
        let (group, artifact) = match (parts.next(), parts.next(), parts.next()) {
            (Some(g), Some(a), None) => (g.trim(), a.trim()),
            _ => return Err(CoordinateError::InvalidFormat(input.to_string())),
        };
        if group.is_empty() {
            return Err(CoordinateError::EmptyGroupId(input.to_string()));
        }
        if artifact.is_empty() {
            return Err(CoordinateError::EmptyArtifactId(input.to_string()));
        }
        if !is_token(group) || !is_token(artifact) {
            return Err(CoordinateError::IllegalCharacter(input.to_string()));
        }
        Ok(Self::from_parts_unchecked(group, artifact))
    }

    pub fn new(group_id: &str, artifact_id: &str) -> Result<Self, CoordinateError> {
        Self::parse(&format!("{group_id}:{artifact_id}"))
    }

    fn from_parts_unchecked(group: &str, artifact: &str) -> Self {
        LibraryCoordinate {
            canonical: format!("{group}:{artifact}"),
            colon: group.len(),
        }
    }

    pub fn group_id(&self) -> &str {
        &self.canonical[..self.colon]
    }

    pub fn artifact_id(&self) -> &str {
        &self.canonical[self.colon + 1..]
    }

    pub fn as_str(&self) -> &str {
        &self.canonical
    }
}

impl fmt::Debug for LibraryCoordinate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LibraryCoordinate({})", self.canonical)
    }
}

impl fmt::Display for LibraryCoordinate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical)
    }
}

impl PartialEq for LibraryCoordinate {
    fn eq(&self, other: &Self) -> bool {
        self.canonical == other.canonical
    }
}

impl Eq for LibraryCoordinate {}

impl Hash for LibraryCoordinate {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.canonical.hash(state);
    }
}

impl PartialOrd for LibraryCoordinate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for LibraryCoordinate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.canonical.cmp(&other.canonical)
    }
}

impl FromStr for LibraryCoordinate {
    type Err = CoordinateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl Serialize for LibraryCoordinate {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.canonical)
    }
}

impl<'de> Deserialize<'de> for LibraryCoordinate {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Self::parse(&s).map_err(serde::de::Error::custom)
    }
}

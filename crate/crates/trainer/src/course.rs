//! Course scripts.
//!
//! A course source is a TOML document listing nodes with a prompt, the
//! sentence text, its space-separated phonemes and the choices leading to
//! other nodes. Participatory courses may branch; custom courses are linear.
//! Resolving a source attaches reference audio and segments to every node.

use std::collections::{BTreeMap, BTreeSet};

use pronunciation_core::phoneme::FORMAT_VERSION;
use pronunciation_core::{PhonemeClassTable, PhonemeSegment};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CourseError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unsupported format_version {0}")]
    FormatVersion(u32),
    #[error("{0}")]
    Invalid(String),
    #[error("unknown phoneme {symbol} in node {node_id}")]
    UnknownPhoneme { node_id: String, symbol: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CourseKind {
    Custom,
    Participatory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Choice {
    pub text: String,
    pub next: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeReference {
    pub phonemes: Vec<String>,
    /// Artifact id of the reference recording.
    pub audio_id: String,
    pub segments: Vec<PhonemeSegment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CourseNode {
    pub node_id: String,
    pub prompt: String,
    pub text: String,
    pub reference: NodeReference,
    pub choices: Vec<Choice>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CourseScript {
    pub format_version: u32,
    pub course_id: String,
    pub kind: CourseKind,
    pub title: String,
    pub entry: String,
    pub nodes: Vec<CourseNode>,
}

impl CourseScript {
    pub fn node(&self, node_id: &str) -> Option<&CourseNode> {
        self.nodes.iter().find(|n| n.node_id == node_id)
    }

    pub fn validate(&self) -> Result<(), CourseError> {
        let graph: Vec<(&str, Vec<&str>)> = self
            .nodes
            .iter()
            .map(|n| {
                (
                    n.node_id.as_str(),
                    n.choices.iter().map(|c| c.next.as_str()).collect(),
                )
            })
            .collect();
        validate_graph(&self.course_id, self.kind, &self.entry, &graph)?;
        for n in &self.nodes {
            let symbols: Vec<&str> = n.reference.segments.iter().map(|s| s.symbol()).collect();
            if symbols != n.reference.phonemes {
                return Err(CourseError::Invalid(format!(
                    "node {}: reference segments do not match its phonemes",
                    n.node_id
                )));
            }
        }
        Ok(())
    }
}

fn validate_graph(
    course_id: &str,
    kind: CourseKind,
    entry: &str,
    nodes: &[(&str, Vec<&str>)],
) -> Result<(), CourseError> {
    let invalid = |m: String| Err(CourseError::Invalid(format!("course {course_id}: {m}")));
    if nodes.is_empty() {
        return invalid("no nodes".into());
    }
    let mut ids = BTreeSet::new();
    for (id, _) in nodes {
        if id.is_empty() || !ids.insert(*id) {
            return invalid(format!("empty or duplicate node id {id:?}"));
        }
    }
    if !ids.contains(entry) {
        return invalid(format!("entry {entry} is not a node"));
    }
    for (id, next) in nodes {
        if let Some(missing) = next.iter().find(|n| !ids.contains(*n)) {
            return invalid(format!("node {id} leads to unknown node {missing}"));
        }
    }
    if kind == CourseKind::Custom {
        // Linear: one successor at most, and walking from the entry visits every node once.
        let succ: BTreeMap<&str, &Vec<&str>> = nodes.iter().map(|(i, n)| (*i, n)).collect();
        if let Some((id, _)) = nodes.iter().find(|(_, n)| n.len() > 1) {
            return invalid(format!("custom course node {id} branches"));
        }
        let mut seen = BTreeSet::new();
        let mut at = Some(entry);
        while let Some(id) = at {
            if !seen.insert(id) {
                return invalid("custom course loops".into());
            }
            at = succ[id].first().copied();
        }
        if seen.len() != nodes.len() {
            return invalid("custom course has unreachable nodes".into());
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSource {
    pub node_id: String,
    pub prompt: String,
    pub text: String,
    /// Space-separated phoneme symbols.
    pub phonemes: String,
    #[serde(default)]
    pub choices: Vec<Choice>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CourseSource {
    pub format_version: u32,
    pub course_id: String,
    pub kind: CourseKind,
    pub title: String,
    pub entry: String,
    pub node: Vec<NodeSource>,
}

/// Splits and validates a space-separated phoneme string, uppercasing symbols.
pub fn parse_phonemes(
    node_id: &str,
    phonemes: &str,
    classes: &PhonemeClassTable,
) -> Result<Vec<String>, CourseError> {
    let symbols: Vec<String> = phonemes
        .split_whitespace()
        .map(str::to_ascii_uppercase)
        .collect();
    if symbols.is_empty() {
        return Err(CourseError::Invalid(format!("node {node_id}: no phonemes")));
    }
    for s in &symbols {
        if classes.phoneme(s).is_err() {
            return Err(CourseError::UnknownPhoneme {
                node_id: node_id.to_owned(),
                symbol: s.clone(),
            });
        }
    }
    Ok(symbols)
}

impl CourseSource {
    pub fn from_toml(document: &str) -> Result<Self, CourseError> {
        let src: Self = toml::from_str(document).map_err(|e| CourseError::Parse(e.to_string()))?;
        if src.format_version != FORMAT_VERSION {
            return Err(CourseError::FormatVersion(src.format_version));
        }
        let graph: Vec<(&str, Vec<&str>)> = src
            .node
            .iter()
            .map(|n| {
                (
                    n.node_id.as_str(),
                    n.choices.iter().map(|c| c.next.as_str()).collect(),
                )
            })
            .collect();
        validate_graph(&src.course_id, src.kind, &src.entry, &graph)?;
        Ok(src)
    }
}

pub const BUNDLED_COURSES: [&str; 2] = [
    include_str!("../data/courses/cafe.toml"),
    include_str!("../data/courses/basics.toml"),
];

pub fn bundled_sources() -> Vec<CourseSource> {
    BUNDLED_COURSES
        .iter()
        .map(|doc| CourseSource::from_toml(doc).expect("bundled course is valid"))
        .collect()
}

//! Phoneme inventory and the phoneme-class taxonomy.
//!
//! The inventory is the 39-symbol ARPAbet set without stress markers. The
//! mapping from symbols to classes is configuration: a class table document
//! lists each class with its member symbols, and loading it checks that every
//! inventory symbol lands in exactly one class.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Document format version understood by the table loaders.
pub const FORMAT_VERSION: u32 = 1;

const DEFAULT_CLASS_TABLE: &str = include_str!("../data/classes.toml");

/// `(symbol, voiced)` for every phoneme of the inventory.
pub const INVENTORY: [(&str, bool); 39] = [
    ("AA", true),
    ("AE", true),
    ("AH", true),
    ("AO", true),
    ("AW", true),
    ("AY", true),
    ("B", true),
    ("CH", false),
    ("D", true),
    ("DH", true),
    ("EH", true),
    ("ER", true),
    ("EY", true),
    ("F", false),
    ("G", true),
    ("HH", false),
    ("IH", true),
    ("IY", true),
    ("JH", true),
    ("K", false),
    ("L", true),
    ("M", true),
    ("N", true),
    ("NG", true),
    ("OW", true),
    ("OY", true),
    ("P", false),
    ("R", true),
    ("S", false),
    ("SH", false),
    ("T", false),
    ("TH", false),
    ("UH", true),
    ("UW", true),
    ("V", true),
    ("W", true),
    ("Y", true),
    ("Z", true),
    ("ZH", true),
];

/// Returns whether `symbol` belongs to the inventory, and if so whether it is voiced.
pub fn inventory_voicing(symbol: &str) -> Option<bool> {
    INVENTORY
        .iter()
        .find(|(s, _)| *s == symbol)
        .map(|&(_, voiced)| voiced)
}

/// Identifier of a phoneme class, e.g. `voiceless_stops`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassId(pub String);

impl ClassId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ClassId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

/// A phoneme of the inventory together with its class.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Phoneme {
    pub symbol: String,
    pub class_id: ClassId,
    pub voiced: bool,
}

#[derive(Debug, Error, PartialEq)]
pub enum PhonemeError {
    #[error("unknown phoneme `{0}`")]
    UnknownPhoneme(String),
    #[error("class table parse error: {0}")]
    Parse(String),
    #[error("unsupported format_version {0} (expected {FORMAT_VERSION})")]
    FormatVersion(u32),
    #[error("class table is empty")]
    NoClasses,
    #[error("duplicate class id `{0}`")]
    DuplicateClass(String),
    #[error("phoneme `{symbol}` assigned to both `{first}` and `{second}`")]
    DuplicateAssignment {
        symbol: String,
        first: String,
        second: String,
    },
    #[error("inventory phonemes without a class: {0:?}")]
    Unassigned(Vec<String>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ClassTableDoc {
    format_version: u32,
    #[serde(rename = "class")]
    classes: Vec<ClassEntryDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ClassEntryDoc {
    id: String,
    name: String,
    phonemes: Vec<String>,
}

/// Ordered list of phoneme classes plus the total symbol → class mapping.
#[derive(Debug, Clone, PartialEq)]
pub struct PhonemeClassTable {
    classes: Vec<(ClassId, String)>,
    mapping: BTreeMap<String, ClassId>,
}

impl PhonemeClassTable {
    /// Parses and validates a class table document.
    pub fn from_toml(document: &str) -> Result<Self, PhonemeError> {
        let doc: ClassTableDoc =
            toml::from_str(document).map_err(|e| PhonemeError::Parse(e.to_string()))?;
        if doc.format_version != FORMAT_VERSION {
            return Err(PhonemeError::FormatVersion(doc.format_version));
        }
        if doc.classes.is_empty() {
            return Err(PhonemeError::NoClasses);
        }

        let mut classes = Vec::with_capacity(doc.classes.len());
        let mut seen = BTreeSet::new();
        let mut mapping: BTreeMap<String, ClassId> = BTreeMap::new();
        for entry in doc.classes {
            if !seen.insert(entry.id.clone()) {
                return Err(PhonemeError::DuplicateClass(entry.id));
            }
            let id = ClassId(entry.id);
            for symbol in entry.phonemes {
                if inventory_voicing(&symbol).is_none() {
                    return Err(PhonemeError::UnknownPhoneme(symbol));
                }
                if let Some(first) = mapping.get(&symbol) {
                    return Err(PhonemeError::DuplicateAssignment {
                        symbol,
                        first: first.0.clone(),
                        second: id.0.clone(),
                    });
                }
                mapping.insert(symbol, id.clone());
            }
            classes.push((id, entry.name));
        }

        let unassigned: Vec<String> = INVENTORY
            .iter()
            .filter(|(s, _)| !mapping.contains_key(*s))
            .map(|(s, _)| s.to_string())
            .collect();
        if !unassigned.is_empty() {
            return Err(PhonemeError::Unassigned(unassigned));
        }

        Ok(Self { classes, mapping })
    }

    pub fn to_toml(&self) -> String {
        let doc = ClassTableDoc {
            format_version: FORMAT_VERSION,
            classes: self
                .classes
                .iter()
                .map(|(id, name)| ClassEntryDoc {
                    id: id.0.clone(),
                    name: name.clone(),
                    phonemes: self
                        .mapping
                        .iter()
                        .filter(|(_, c)| *c == id)
                        .map(|(s, _)| s.clone())
                        .collect(),
                })
                .collect(),
        };
        toml::to_string(&doc).expect("class table serializes")
    }

    pub fn classes(&self) -> &[(ClassId, String)] {
        &self.classes
    }

    pub fn class_ids(&self) -> impl Iterator<Item = &ClassId> {
        self.classes.iter().map(|(id, _)| id)
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn contains_class(&self, id: &ClassId) -> bool {
        self.classes.iter().any(|(c, _)| c == id)
    }

    pub fn class_name(&self, id: &ClassId) -> Option<&str> {
        self.classes
            .iter()
            .find(|(c, _)| c == id)
            .map(|(_, n)| n.as_str())
    }

    /// Returns the class of `symbol`.
    pub fn classify(&self, symbol: &str) -> Result<&ClassId, PhonemeError> {
        self.mapping
            .get(symbol)
            .ok_or_else(|| PhonemeError::UnknownPhoneme(symbol.to_owned()))
    }

    /// Resolves a symbol into a full [`Phoneme`].
    pub fn phoneme(&self, symbol: &str) -> Result<Phoneme, PhonemeError> {
        let class_id = self.classify(symbol)?.clone();
        let voiced = inventory_voicing(symbol).expect("mapping only holds inventory symbols");
        Ok(Phoneme {
            symbol: symbol.to_owned(),
            class_id,
            voiced,
        })
    }

    /// Member symbols of a class, in inventory order.
    pub fn members(&self, id: &ClassId) -> Vec<&str> {
        INVENTORY
            .iter()
            .map(|(s, _)| *s)
            .filter(|s| self.mapping.get(*s) == Some(id))
            .collect()
    }
}

impl Default for PhonemeClassTable {
    /// The shipped 14-class taxonomy.
    fn default() -> Self {
        Self::from_toml(DEFAULT_CLASS_TABLE).expect("bundled class table is valid")
    }
}

/// Free-function form of [`PhonemeClassTable::classify`].
pub fn classify_phoneme<'t>(
    symbol: &str,
    table: &'t PhonemeClassTable,
) -> Result<&'t ClassId, PhonemeError> {
    table.classify(symbol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inventory_has_39_unique_symbols() {
        let set: BTreeSet<_> = INVENTORY.iter().map(|(s, _)| *s).collect();
        assert_eq!(set.len(), 39);
        assert!(INVENTORY.iter().all(|(s, _)| !s.is_empty()));
    }

    #[test]
    fn default_table_has_14_classes() {
        let table = PhonemeClassTable::default();
        assert_eq!(table.len(), 14);
        for (sym, _) in INVENTORY {
            assert!(table.classify(sym).is_ok(), "{sym} unmapped");
        }
    }

    #[test]
    fn classify_examples() {
        let table = PhonemeClassTable::default();
        assert_eq!(table.classify("P").unwrap().as_str(), "voiceless_stops");
        assert_eq!(table.classify("B").unwrap().as_str(), "voiced_stops");
        assert_eq!(
            classify_phoneme("ZZZ", &table),
            Err(PhonemeError::UnknownPhoneme("ZZZ".into()))
        );
    }

    #[test]
    fn thirteen_class_variant_is_expressible() {
        // Merge the lateral into the liquids.
        let default = PhonemeClassTable::default().to_toml();
        let doc = default
            .replace("phonemes = [\"R\"]", "phonemes = [\"L\", \"R\"]")
            .replace(
                "[[class]]\nid = \"lateral\"\nname = \"Lateral\"\nphonemes = [\"L\"]\n",
                "",
            );
        let table = PhonemeClassTable::from_toml(&doc).unwrap();
        assert_eq!(table.len(), 13);
        assert_eq!(table.classify("L").unwrap().as_str(), "liquids");
    }

    #[test]
    fn unassigned_phoneme_rejected() {
        let doc = r#"
format_version = 1
[[class]]
id = "stops"
name = "Stops"
phonemes = ["P", "T", "K"]
"#;
        match PhonemeClassTable::from_toml(doc) {
            Err(PhonemeError::Unassigned(list)) => assert_eq!(list.len(), 36),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn double_assignment_rejected() {
        let default = PhonemeClassTable::default().to_toml();
        let doc = default.replace("phonemes = [\"R\"]", "phonemes = [\"P\", \"R\"]");
        assert!(matches!(
            PhonemeClassTable::from_toml(&doc),
            Err(PhonemeError::DuplicateAssignment { .. })
        ));
    }

    #[test]
    fn missing_version_is_a_parse_error() {
        let doc = "[[class]]\nid = \"a\"\nname = \"A\"\nphonemes = []\n";
        assert!(matches!(
            PhonemeClassTable::from_toml(doc),
            Err(PhonemeError::Parse(_))
        ));
    }

    #[test]
    fn toml_round_trip() {
        let table = PhonemeClassTable::default();
        let again = PhonemeClassTable::from_toml(&table.to_toml()).unwrap();
        assert_eq!(table, again);
    }
}

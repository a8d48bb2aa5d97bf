//! Viseme poses and annotation content.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{AnnotationKind, Articulator, ArticulatorPose, VisualError};
use crate::phoneme::{ClassId, Phoneme, FORMAT_VERSION};

const DEFAULT_VISEMES: &str = include_str!("../../data/visemes.toml");
const DEFAULT_ANNOTATIONS: &str = include_str!("../../data/annotations.toml");

/// Phoneme symbol to articulator pose.
#[derive(Debug, Clone, PartialEq)]
pub struct VisemeLibrary {
    poses: BTreeMap<String, ArticulatorPose>,
}

#[derive(Deserialize)]
struct VisemeDoc {
    format_version: u32,
    visemes: BTreeMap<String, [f64; 7]>,
}

impl VisemeLibrary {
    pub fn from_toml(document: &str) -> Result<Self, VisualError> {
        let doc: VisemeDoc =
            toml::from_str(document).map_err(|e| VisualError::Parse(e.to_string()))?;
        if doc.format_version != FORMAT_VERSION {
            return Err(VisualError::FormatVersion(doc.format_version));
        }
        let poses = doc
            .visemes
            .into_iter()
            .map(|(sym, v)| Ok((sym.to_ascii_uppercase(), ArticulatorPose::from_array(v)?)))
            .collect::<Result<_, VisualError>>()?;
        Ok(Self { poses })
    }

    pub fn from_poses(poses: BTreeMap<String, ArticulatorPose>) -> Self {
        Self { poses }
    }

    pub fn get(&self, symbol: &str) -> Option<&ArticulatorPose> {
        self.poses.get(symbol)
    }

    pub fn pose(&self, symbol: &str) -> Result<&ArticulatorPose, VisualError> {
        self.get(symbol)
            .ok_or_else(|| VisualError::MissingViseme(symbol.to_owned()))
    }

    pub fn symbols(&self) -> impl Iterator<Item = &str> {
        self.poses.keys().map(String::as_str)
    }
}

impl Default for VisemeLibrary {
    fn default() -> Self {
        Self::from_toml(DEFAULT_VISEMES).expect("bundled viseme library is valid")
    }
}

/// Resolved annotation content for one phoneme.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationEntry {
    pub graphic: AnnotationKind,
    pub anchor: Articulator,
    pub cue: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ClassEntry {
    graphic: AnnotationKind,
    anchor: Articulator,
    cue: String,
    text: String,
    #[serde(default)]
    phoneme: BTreeMap<String, PhonemeOverride>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PhonemeOverride {
    anchor: Option<Articulator>,
    text: Option<String>,
}

#[derive(Deserialize)]
struct AnnotationDoc {
    format_version: u32,
    class: BTreeMap<String, ClassEntry>,
}

/// Phoneme class to graphic kind, anchor and text, with per-phoneme overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationLibrary {
    classes: BTreeMap<ClassId, ClassEntry>,
}

impl AnnotationLibrary {
    pub fn from_toml(document: &str) -> Result<Self, VisualError> {
        let doc: AnnotationDoc =
            toml::from_str(document).map_err(|e| VisualError::Parse(e.to_string()))?;
        if doc.format_version != FORMAT_VERSION {
            return Err(VisualError::FormatVersion(doc.format_version));
        }
        for (id, entry) in &doc.class {
            if entry.graphic == AnnotationKind::Text {
                return Err(VisualError::Parse(format!(
                    "class {id}: graphic must be arrow or airflow"
                )));
            }
        }
        Ok(Self {
            classes: doc
                .class
                .into_iter()
                .map(|(k, v)| (ClassId(k), v))
                .collect(),
        })
    }

    pub fn entry(&self, phoneme: &Phoneme) -> Result<AnnotationEntry, VisualError> {
        let class = self
            .classes
            .get(&phoneme.class_id)
            .ok_or_else(|| VisualError::MissingAnnotationEntry(phoneme.class_id.to_string()))?;
        let over = class.phoneme.get(&phoneme.symbol);
        Ok(AnnotationEntry {
            graphic: class.graphic,
            anchor: over.and_then(|o| o.anchor).unwrap_or(class.anchor),
            cue: class.cue.clone(),
            text: over
                .and_then(|o| o.text.clone())
                .unwrap_or_else(|| class.text.clone()),
        })
    }

    pub fn class_ids(&self) -> impl Iterator<Item = &ClassId> {
        self.classes.keys()
    }
}

impl Default for AnnotationLibrary {
    fn default() -> Self {
        Self::from_toml(DEFAULT_ANNOTATIONS).expect("bundled annotation library is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phoneme::{PhonemeClassTable, INVENTORY};

    #[test]
    fn visemes_cover_inventory() {
        let lib = VisemeLibrary::default();
        for (sym, _) in INVENTORY {
            assert!(lib.get(sym).is_some(), "{sym}");
        }
    }

    #[test]
    fn annotations_cover_default_classes() {
        let lib = AnnotationLibrary::default();
        let classes = PhonemeClassTable::default();
        for id in classes.class_ids() {
            for sym in classes.members(id) {
                lib.entry(&classes.phoneme(sym).unwrap()).unwrap();
            }
        }
    }

    #[test]
    fn golden_entries() {
        let lib = AnnotationLibrary::default();
        let classes = PhonemeClassTable::default();
        let p = lib.entry(&classes.phoneme("P").unwrap()).unwrap();
        assert_eq!(p.graphic, AnnotationKind::Airflow);
        assert_eq!(p.anchor, Articulator::Lips);
        assert_eq!(p.text, "bilabial stop, burst of air");
        let n = lib.entry(&classes.phoneme("N").unwrap()).unwrap();
        assert_eq!(n.graphic, AnnotationKind::Arrow);
        assert_eq!(n.anchor, Articulator::Velum);
    }

    #[test]
    fn out_of_range_pose_rejected() {
        let doc = "format_version = 1\n[visemes]\nP = [0.2, 0.0, 0.4, 0.45, 0.5, 0.5, 1.2]\n";
        assert!(matches!(
            VisemeLibrary::from_toml(doc),
            Err(VisualError::InvalidPose { .. })
        ));
    }
}

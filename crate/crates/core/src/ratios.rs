//! Exaggeration levels, proficiency bands, and the ratio table.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::phoneme::{ClassId, PhonemeClassTable, FORMAT_VERSION};

const DEFAULT_RATIO_TABLE: &str = include_str!("../data/ratios.toml");

pub const MIN_RATIO: f64 = 0.5;
pub const MAX_RATIO: f64 = 3.0;

/// Boundary between the low and high proficiency bands. Scores at the boundary are high.
pub const BAND_THRESHOLD: f64 = 50.0;

/// Ordinal exaggeration level used by rating studies (E1..E4).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExaggerationLevel {
    Zero,
    Slight,
    Medium,
    Strong,
}

impl ExaggerationLevel {
    pub const ALL: [ExaggerationLevel; 4] = [Self::Zero, Self::Slight, Self::Medium, Self::Strong];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Zero => "zero",
            Self::Slight => "slight",
            Self::Medium => "medium",
            Self::Strong => "strong",
        }
    }
}

impl FromStr for ExaggerationLevel {
    type Err = RatioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "zero" | "e1" => Ok(Self::Zero),
            "slight" | "e2" => Ok(Self::Slight),
            "medium" | "e3" => Ok(Self::Medium),
            "strong" | "e4" => Ok(Self::Strong),
            _ => Err(RatioError::Parse(format!(
                "unknown exaggeration level `{s}`"
            ))),
        }
    }
}

impl fmt::Display for ExaggerationLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Two-level learner classification derived from an accumulated score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProficiencyBand {
    Low,
    High,
}

impl ProficiencyBand {
    pub const ALL: [ProficiencyBand; 2] = [Self::Low, Self::High];

    /// `Low` on `[0, 50)`, `High` on `[50, 100]`.
    pub fn from_score(score: f64) -> Self {
        if score < BAND_THRESHOLD {
            Self::Low
        } else {
            Self::High
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Low => "low",
            Self::High => "high",
        }
    }
}

impl FromStr for ProficiencyBand {
    type Err = RatioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "low" => Ok(Self::Low),
            "high" => Ok(Self::High),
            _ => Err(RatioError::Parse(format!("unknown proficiency band `{s}`"))),
        }
    }
}

impl fmt::Display for ProficiencyBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum RatioError {
    #[error("ratio table parse error: {0}")]
    Parse(String),
    #[error("unsupported format_version {0} (expected {FORMAT_VERSION})")]
    FormatVersion(u32),
    #[error("ratio table missing entries: {}", format_pairs(.0))]
    MissingEntry(Vec<(ProficiencyBand, ClassId)>),
    #[error("ratio table entry for unknown class `{0}`")]
    UnknownClass(ClassId),
    #[error("{name} ratio {value} outside [{MIN_RATIO}, {MAX_RATIO}]")]
    OutOfRange { name: &'static str, value: f64 },
}

fn format_pairs(pairs: &[(ProficiencyBand, ClassId)]) -> String {
    pairs
        .iter()
        .map(|(b, c)| format!("({b}, {c})"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Pitch, duration, and energy multipliers. `1.0` leaves a dimension untouched.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioTriple {
    #[serde(rename = "pitch")]
    pub pitch_ratio: f64,
    #[serde(rename = "duration")]
    pub duration_ratio: f64,
    #[serde(rename = "energy")]
    pub energy_ratio: f64,
}

impl RatioTriple {
    pub const IDENTITY: RatioTriple = RatioTriple {
        pitch_ratio: 1.0,
        duration_ratio: 1.0,
        energy_ratio: 1.0,
    };

    pub fn new(pitch: f64, duration: f64, energy: f64) -> Result<Self, RatioError> {
        let triple = Self {
            pitch_ratio: pitch,
            duration_ratio: duration,
            energy_ratio: energy,
        };
        triple.validate()?;
        Ok(triple)
    }

    pub fn validate(&self) -> Result<(), RatioError> {
        check_ratio("pitch", self.pitch_ratio)?;
        check_ratio("duration", self.duration_ratio)?;
        check_ratio("energy", self.energy_ratio)
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }

    /// Componentwise `self >= other`.
    pub fn dominates(&self, other: &RatioTriple) -> bool {
        self.pitch_ratio >= other.pitch_ratio
            && self.duration_ratio >= other.duration_ratio
            && self.energy_ratio >= other.energy_ratio
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.pitch_ratio, self.duration_ratio, self.energy_ratio]
    }
}

pub(crate) fn check_ratio(name: &'static str, value: f64) -> Result<(), RatioError> {
    if (MIN_RATIO..=MAX_RATIO).contains(&value) {
        Ok(())
    } else {
        Err(RatioError::OutOfRange { name, value })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct RatioTableDoc {
    format_version: u32,
    #[serde(default)]
    low: BTreeMap<String, RatioTriple>,
    #[serde(default)]
    high: BTreeMap<String, RatioTriple>,
}

/// Total map `(band, class) -> RatioTriple`.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioTable {
    entries: BTreeMap<(ProficiencyBand, ClassId), RatioTriple>,
}

impl RatioTable {
    /// Builds a table from explicit entries, checking totality over `classes`.
    pub fn from_entries(
        entries: BTreeMap<(ProficiencyBand, ClassId), RatioTriple>,
        classes: &PhonemeClassTable,
    ) -> Result<Self, RatioError> {
        for ((_, class), triple) in &entries {
            if !classes.contains_class(class) {
                return Err(RatioError::UnknownClass(class.clone()));
            }
            triple.validate()?;
        }
        let missing: Vec<_> = ProficiencyBand::ALL
            .iter()
            .flat_map(|&band| classes.class_ids().map(move |c| (band, c.clone())))
            .filter(|key| !entries.contains_key(key))
            .collect();
        if !missing.is_empty() {
            return Err(RatioError::MissingEntry(missing));
        }
        Ok(Self { entries })
    }

    /// A table mapping every key to the identity triple.
    pub fn identity(classes: &PhonemeClassTable) -> Self {
        let entries = ProficiencyBand::ALL
            .iter()
            .flat_map(|&band| {
                classes
                    .class_ids()
                    .map(move |c| ((band, c.clone()), RatioTriple::IDENTITY))
            })
            .collect();
        Self { entries }
    }

    /// The bundled, non-normative default table over the default class taxonomy.
    pub fn default_table() -> Self {
        load_ratio_table(DEFAULT_RATIO_TABLE, &PhonemeClassTable::default())
            .expect("bundled ratio table is valid")
    }

    pub fn lookup(&self, band: ProficiencyBand, class: &ClassId) -> RatioTriple {
        // Totality is established at construction; a foreign class id is a caller bug.
        *self
            .entries
            .get(&(band, class.clone()))
            .unwrap_or_else(|| panic!("class `{class}` is not covered by this ratio table"))
    }

    pub fn get(&self, band: ProficiencyBand, class: &ClassId) -> Option<RatioTriple> {
        self.entries.get(&(band, class.clone())).copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&(ProficiencyBand, ClassId), &RatioTriple)> {
        self.entries.iter()
    }

    pub fn to_toml(&self) -> String {
        let mut doc = RatioTableDoc {
            format_version: FORMAT_VERSION,
            low: BTreeMap::new(),
            high: BTreeMap::new(),
        };
        for ((band, class), triple) in &self.entries {
            let target = match band {
                ProficiencyBand::Low => &mut doc.low,
                ProficiencyBand::High => &mut doc.high,
            };
            target.insert(class.0.clone(), *triple);
        }
        toml::to_string(&doc).expect("ratio table serializes")
    }
}

/// Parses and validates a ratio table document against a class taxonomy.
pub fn load_ratio_table(
    document: &str,
    classes: &PhonemeClassTable,
) -> Result<RatioTable, RatioError> {
    let doc: RatioTableDoc =
        toml::from_str(document).map_err(|e| RatioError::Parse(e.to_string()))?;
    if doc.format_version != FORMAT_VERSION {
        return Err(RatioError::FormatVersion(doc.format_version));
    }
    let mut entries = BTreeMap::new();
    for (band, rows) in [
        (ProficiencyBand::Low, doc.low),
        (ProficiencyBand::High, doc.high),
    ] {
        for (class, triple) in rows {
            entries.insert((band, ClassId(class)), triple);
        }
    }
    RatioTable::from_entries(entries, classes)
}

pub fn lookup_ratios(table: &RatioTable, band: ProficiencyBand, class: &ClassId) -> RatioTriple {
    table.lookup(band, class)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn classes() -> PhonemeClassTable {
        PhonemeClassTable::default()
    }

    #[test]
    fn default_low_voiceless_stop_pitch() {
        let table = RatioTable::default_table();
        let triple = lookup_ratios(&table, ProficiencyBand::Low, &"voiceless_stops".into());
        assert_eq!(triple.pitch_ratio, 1.26);
    }

    #[test]
    fn default_low_dominates_high() {
        let table = RatioTable::default_table();
        for class in classes().class_ids() {
            let low = table.lookup(ProficiencyBand::Low, class);
            let high = table.lookup(ProficiencyBand::High, class);
            assert!(low.dominates(&high), "{class}: {low:?} vs {high:?}");
        }
    }

    #[test]
    fn default_values_in_medium_range() {
        let table = RatioTable::default_table();
        for (_, t) in table.entries() {
            for v in t.as_array() {
                assert!((1.1..=1.6).contains(&v), "{v}");
            }
        }
    }

    #[test]
    fn identity_table_loads() {
        let classes = classes();
        let doc = RatioTable::identity(&classes).to_toml();
        let table = load_ratio_table(&doc, &classes).unwrap();
        for band in ProficiencyBand::ALL {
            for c in classes.class_ids() {
                assert_eq!(table.lookup(band, c), RatioTriple::IDENTITY);
            }
        }
    }

    #[test]
    fn missing_class_reported() {
        let classes = classes();
        let table = RatioTable::default_table();
        let mut doc: toml::Table = toml::from_str(&table.to_toml()).unwrap();
        doc["high"].as_table_mut().unwrap().remove("nasals");
        let err = load_ratio_table(&toml::to_string(&doc).unwrap(), &classes).unwrap_err();
        assert_eq!(
            err,
            RatioError::MissingEntry(vec![(ProficiencyBand::High, "nasals".into())])
        );
        assert!(err.to_string().contains("(high, nasals)"));
    }

    #[test]
    fn out_of_range_rejected() {
        let classes = classes();
        let doc = RatioTable::default_table()
            .to_toml()
            .replacen("pitch = 1.26", "pitch = 3.2", 1);
        assert!(matches!(
            load_ratio_table(&doc, &classes),
            Err(RatioError::OutOfRange { name: "pitch", .. })
        ));
    }

    #[test]
    fn wrong_version_rejected() {
        let doc = RatioTable::default_table()
            .to_toml()
            .replace("format_version = 1", "format_version = 7");
        assert_eq!(
            load_ratio_table(&doc, &classes()),
            Err(RatioError::FormatVersion(7))
        );
    }

    #[test]
    fn band_boundary() {
        assert_eq!(ProficiencyBand::from_score(0.0), ProficiencyBand::Low);
        assert_eq!(ProficiencyBand::from_score(49.999), ProficiencyBand::Low);
        assert_eq!(ProficiencyBand::from_score(50.0), ProficiencyBand::High);
        assert_eq!(ProficiencyBand::from_score(100.0), ProficiencyBand::High);
    }

    #[test]
    fn level_order_and_aliases() {
        use ExaggerationLevel::*;
        assert!(Zero < Slight && Slight < Medium && Medium < Strong);
        assert_eq!("E3".parse::<ExaggerationLevel>().unwrap(), Medium);
        assert_eq!("strong".parse::<ExaggerationLevel>().unwrap(), Strong);
    }
}

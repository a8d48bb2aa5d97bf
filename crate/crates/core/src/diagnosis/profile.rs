//! Exponentially decayed per-class proficiency.
//!
//! With results `R_0` (latest) .. `R_n` (first ever) the accumulated score is
//!
//! ```text
//! R = (1 - a)^n R_n + sum_{i < n} a (1 - a)^i R_i
//! ```
//!
//! which the recursion `R' = a r + (1 - a) R` (seeded with the first result)
//! reproduces exactly.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{AttemptScorecard, DiagnosisError};
use crate::phoneme::{ClassId, FORMAT_VERSION};
use crate::ratios::ProficiencyBand;

pub const DEFAULT_ALPHA: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassProficiency {
    pub accumulated: f64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProficiencyProfile {
    alpha: f64,
    per_class: BTreeMap<ClassId, ClassProficiency>,
}

impl Default for ProficiencyProfile {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            per_class: BTreeMap::new(),
        }
    }
}

impl ProficiencyProfile {
    pub fn new(alpha: f64) -> Result<Self, DiagnosisError> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(DiagnosisError::InvalidAlpha(alpha));
        }
        Ok(Self {
            alpha,
            per_class: BTreeMap::new(),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn class(&self, id: &ClassId) -> Option<&ClassProficiency> {
        self.per_class.get(id)
    }

    pub fn classes(&self) -> impl Iterator<Item = (&ClassId, &ClassProficiency)> {
        self.per_class.iter()
    }

    pub fn count(&self, id: &ClassId) -> u64 {
        self.per_class.get(id).map_or(0, |c| c.count)
    }

    /// Mean accumulated score over classes with at least one result.
    pub fn overall(&self) -> Option<f64> {
        let touched: Vec<f64> = self
            .per_class
            .values()
            .filter(|c| c.count > 0)
            .map(|c| c.accumulated)
            .collect();
        (!touched.is_empty()).then(|| touched.iter().sum::<f64>() / touched.len() as f64)
    }

    /// Folds one class result into the profile.
    pub fn record(&mut self, class: ClassId, result: f64) {
        let alpha = self.alpha;
        self.per_class
            .entry(class)
            .and_modify(|c| {
                c.accumulated = if c.count > 0 {
                    alpha * result + (1.0 - alpha) * c.accumulated
                } else {
                    result
                };
                c.count += 1;
            })
            .or_insert(ClassProficiency {
                accumulated: result,
                count: 1,
            });
    }

    /// Folds every class touched by `scorecard`, using the mean segment score per class.
    pub fn accumulate(&mut self, scorecard: &AttemptScorecard) {
        for (class, mean) in scorecard.class_means() {
            self.record(class, mean);
        }
    }

    pub fn accumulated(&self, scorecard: &AttemptScorecard) -> Self {
        let mut next = self.clone();
        next.accumulate(scorecard);
        next
    }

    /// `Low` below 50, `High` from 50; classes without results are `Low`.
    pub fn band_of(&self, class: &ClassId) -> ProficiencyBand {
        match self.per_class.get(class) {
            Some(c) if c.count > 0 => ProficiencyBand::from_score(c.accumulated),
            _ => ProficiencyBand::Low,
        }
    }

    pub fn to_toml(&self) -> String {
        let doc = ProfileDoc {
            format_version: FORMAT_VERSION,
            alpha: self.alpha,
            classes: self
                .per_class
                .iter()
                .map(|(k, v)| (k.0.clone(), *v))
                .collect(),
        };
        toml::to_string(&doc).expect("profile serializes")
    }

    pub fn from_toml(document: &str) -> Result<Self, DiagnosisError> {
        let doc: ProfileDoc =
            toml::from_str(document).map_err(|e| DiagnosisError::Parse(e.to_string()))?;
        if doc.format_version != FORMAT_VERSION {
            return Err(DiagnosisError::FormatVersion(doc.format_version));
        }
        let mut profile = Self::new(doc.alpha)?;
        for (class, state) in doc.classes {
            if !(0.0..=100.0).contains(&state.accumulated) {
                return Err(DiagnosisError::InvalidScore(state.accumulated));
            }
            profile.per_class.insert(ClassId(class), state);
        }
        Ok(profile)
    }
}

/// Free-function form of [`ProficiencyProfile::accumulated`].
pub fn accumulate(
    profile: &ProficiencyProfile,
    scorecard: &AttemptScorecard,
) -> ProficiencyProfile {
    profile.accumulated(scorecard)
}

pub fn band_of(profile: &ProficiencyProfile, class: &ClassId) -> ProficiencyBand {
    profile.band_of(class)
}

#[derive(Debug, Serialize, Deserialize)]
struct ProfileDoc {
    format_version: u32,
    alpha: f64,
    #[serde(default)]
    classes: BTreeMap<String, ClassProficiency>,
}

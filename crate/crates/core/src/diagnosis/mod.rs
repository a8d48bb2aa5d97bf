//! Per-phoneme scoring, proficiency tracking and target selection.

mod profile;
mod scorer;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::{AlignmentError, PhonemeSegment};
use crate::audio::AudioBuffer;
use crate::phoneme::ClassId;

pub use profile::{accumulate, band_of, ClassProficiency, ProficiencyProfile, DEFAULT_ALPHA};
pub use scorer::{
    LogisticCalibration, PhonemeScorer, TemplateBank, TemplateScorer, DEFAULT_MIDPOINT,
    DEFAULT_SCALE,
};

#[derive(Debug, Error, PartialEq)]
pub enum DiagnosisError {
    #[error("no template for phoneme {0}")]
    MissingTemplate(String),
    #[error("segment does not fit the learner audio: {0}")]
    AlignmentMismatch(String),
    #[error("scorecard has no segments")]
    EmptyScorecard,
    #[error("alpha must lie strictly between 0 and 1, got {0}")]
    InvalidAlpha(f64),
    #[error("score {0} outside [0, 100]")]
    InvalidScore(f64),
    #[error("calibration needs at least two distinct distances")]
    DegenerateCalibration,
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unsupported format_version {0}")]
    FormatVersion(u32),
    #[error(transparent)]
    Features(#[from] AlignmentError),
}

/// Score in `[0, 100]`; higher is better.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct PhonemeScore(f64);

impl PhonemeScore {
    pub fn new(value: f64) -> Result<Self, DiagnosisError> {
        if (0.0..=100.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(DiagnosisError::InvalidScore(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for PhonemeScore {
    type Error = DiagnosisError;

    fn try_from(v: f64) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<PhonemeScore> for f64 {
    fn from(s: PhonemeScore) -> f64 {
        s.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSegment {
    pub segment: PhonemeSegment,
    pub score: PhonemeScore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptScorecard {
    pub utterance_id: String,
    pub segments: Vec<ScoredSegment>,
}

impl AttemptScorecard {
    /// Mean segment score per class, ordered by class id.
    pub fn class_means(&self) -> BTreeMap<ClassId, f64> {
        let mut sums: BTreeMap<ClassId, (f64, usize)> = BTreeMap::new();
        for s in &self.segments {
            let e = sums.entry(s.segment.phoneme.class_id.clone()).or_default();
            e.0 += s.score.value();
            e.1 += 1;
        }
        sums.into_iter()
            .map(|(k, (sum, n))| (k, sum / n as f64))
            .collect()
    }

    pub fn mean_score(&self) -> Option<f64> {
        let n = self.segments.len();
        (n > 0).then(|| self.segments.iter().map(|s| s.score.value()).sum::<f64>() / n as f64)
    }
}

/// Scores every aligned segment of `learner` against its phoneme's templates.
pub fn score_attempt(
    utterance_id: &str,
    learner: &AudioBuffer,
    segments: &[PhonemeSegment],
    templates: &TemplateBank,
    scorer: &dyn PhonemeScorer,
) -> Result<AttemptScorecard, DiagnosisError> {
    let duration = learner.duration_ms();
    let mut scored = Vec::with_capacity(segments.len());
    for seg in segments {
        // Half a sample of slack for boundaries rounded to microseconds.
        if seg.start_ms < 0.0 || seg.end_ms <= seg.start_ms || seg.end_ms > duration + 0.05 {
            return Err(DiagnosisError::AlignmentMismatch(format!(
                "{} [{}, {}) ms in {} ms of audio",
                seg.symbol(),
                seg.start_ms,
                seg.end_ms,
                duration
            )));
        }
        let template = templates
            .get(seg.symbol())
            .ok_or_else(|| DiagnosisError::MissingTemplate(seg.symbol().to_owned()))?;
        let score = scorer.score(learner, seg, template)?;
        scored.push(ScoredSegment {
            segment: seg.clone(),
            score,
        });
    }
    Ok(AttemptScorecard {
        utterance_id: utterance_id.to_owned(),
        segments: scored,
    })
}

/// Picks the segment whose class is weakest.
///
/// `profile` is the profile after this attempt has been accumulated; classes
/// it has no entry for fall back to their mean score in `scorecard`. Ties are
/// broken by the lower raw segment score, then by the earlier start.
pub fn select_target_phoneme<'a>(
    scorecard: &'a AttemptScorecard,
    profile: &ProficiencyProfile,
) -> Result<&'a ScoredSegment, DiagnosisError> {
    let means = scorecard.class_means();
    let class_value = |id: &ClassId| match profile.class(id) {
        Some(c) if c.count > 0 => c.accumulated,
        _ => means[id],
    };
    scorecard
        .segments
        .iter()
        .min_by(|a, b| {
            let ka = class_value(&a.segment.phoneme.class_id);
            let kb = class_value(&b.segment.phoneme.class_id);
            ka.total_cmp(&kb)
                .then(a.score.value().total_cmp(&b.score.value()))
                .then(a.segment.start_ms.total_cmp(&b.segment.start_ms))
        })
        .ok_or(DiagnosisError::EmptyScorecard)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phoneme::PhonemeClassTable;

    fn card(entries: &[(&str, f64, f64)]) -> AttemptScorecard {
        let classes = PhonemeClassTable::default();
        AttemptScorecard {
            utterance_id: "u".into(),
            segments: entries
                .iter()
                .map(|&(sym, start, score)| ScoredSegment {
                    segment: PhonemeSegment::new(
                        classes.phoneme(sym).unwrap(),
                        start,
                        start + 80.0,
                    ),
                    score: PhonemeScore::new(score).unwrap(),
                })
                .collect(),
        }
    }

    #[test]
    fn lowest_scoring_segment_on_fresh_profile() {
        let c = card(&[("P", 0.0, 40.0), ("IY", 80.0, 90.0), ("T", 160.0, 85.0)]);
        // P and T share a class (mean 62.5), still lowest.
        let p = ProficiencyProfile::default().accumulated(&c);
        assert_eq!(select_target_phoneme(&c, &p).unwrap().segment.symbol(), "P");
        let fresh = ProficiencyProfile::default();
        assert_eq!(
            select_target_phoneme(&c, &fresh).unwrap().segment.symbol(),
            "P"
        );
    }

    #[test]
    fn history_breaks_equal_raw_scores() {
        let classes = PhonemeClassTable::default();
        let mut profile = ProficiencyProfile::default();
        profile.record(classes.classify("M").unwrap().clone(), 20.0);
        profile.record(classes.classify("L").unwrap().clone(), 90.0);
        let c = card(&[("L", 0.0, 60.0), ("M", 80.0, 60.0)]);
        let after = profile.accumulated(&c);
        // M: 0.9*60 + 0.1*20 = 56; L: 0.9*60 + 0.1*90 = 63.
        assert_eq!(
            select_target_phoneme(&c, &after).unwrap().segment.symbol(),
            "M"
        );
    }

    #[test]
    fn ties_go_to_lower_raw_score_then_earlier_start() {
        let c = card(&[("T", 0.0, 70.0), ("P", 80.0, 50.0), ("K", 160.0, 50.0)]);
        let p = ProficiencyProfile::default().accumulated(&c);
        let picked = select_target_phoneme(&c, &p).unwrap();
        assert_eq!(picked.segment.symbol(), "P");
    }

    #[test]
    fn empty_scorecard() {
        let c = card(&[]);
        assert_eq!(
            select_target_phoneme(&c, &ProficiencyProfile::default()),
            Err(DiagnosisError::EmptyScorecard)
        );
    }

    #[test]
    fn score_range_enforced() {
        assert!(PhonemeScore::new(100.0).is_ok());
        assert!(PhonemeScore::new(-0.1).is_err());
        assert!(serde_json::from_str::<PhonemeScore>("101").is_err());
    }
}

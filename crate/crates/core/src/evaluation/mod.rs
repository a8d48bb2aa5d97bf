//! Listener-rating metrics, ratio fitting and significance tests.
//!
//! Metrics over a set of ratings:
//!
//! * `DR`: fraction of ratings where the exaggerated phoneme was discerned.
//! * `UR`: fraction where it was still recognized.
//! * `PS`: mean perception score, `P(o) = 2.5 - |2.5 - o|` for an opinion
//!   `o` in `[0, 5]`.
//! * `V = DR + UR + PS / 2.5`, the objective maximized by ratio fitting.

mod fit;
mod records;
mod stats;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use fit::{
    fit_optimum_ratios, fit_ratio_table, fitting_samples, FitBounds, FitResult, GroupFit, Grouping,
    MIN_FIT_SAMPLES,
};
pub use records::{read_ratings, write_ratings, RatingRecord};
pub use stats::{improvement_rate, one_tailed_t_test, TTestResult};

#[derive(Debug, Error, PartialEq)]
pub enum EvaluationError {
    #[error("no rating records")]
    EmptyRecords,
    #[error("{name} = {value} is out of range")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("V = {v} does not equal DR + UR + PS/2.5 = {expected}")]
    InconsistentSummary { v: f64, expected: f64 },
    #[error("need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("design matrix is rank deficient (rank {rank} of {needed})")]
    DegenerateDesign { rank: usize, needed: usize },
    #[error("invalid bounds: {0}")]
    InvalidBounds(String),
    #[error("no ratings for band {band} to fit")]
    MissingGroup { band: String },
    #[error("baseline score is zero")]
    ZeroBaseline,
    #[error("zero variance in group {0}")]
    ZeroVariance(char),
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("csv: {0}")]
    Csv(String),
}

fn proportion(
    records: &[RatingRecord],
    flag: impl Fn(&RatingRecord) -> bool,
) -> Result<f64, EvaluationError> {
    if records.is_empty() {
        return Err(EvaluationError::EmptyRecords);
    }
    Ok(records.iter().filter(|r| flag(r)).count() as f64 / records.len() as f64)
}

/// Fraction of records where the exaggerated phoneme was discerned.
pub fn distinguishability_rate(records: &[RatingRecord]) -> Result<f64, EvaluationError> {
    proportion(records, |r| r.distinguished)
}

/// Fraction of records where the exaggerated phoneme was still recognized.
pub fn understandability_rate(records: &[RatingRecord]) -> Result<f64, EvaluationError> {
    proportion(records, |r| r.understood)
}

/// Tent function peaking at 2.5 for an opinion of 2.5.
pub fn perception_score(opinion: f64) -> Result<f64, EvaluationError> {
    if !(0.0..=5.0).contains(&opinion) {
        return Err(EvaluationError::OutOfRange {
            name: "opinion",
            value: opinion,
        });
    }
    Ok(2.5 - (2.5 - opinion).abs())
}

pub fn mean_perception_score(records: &[RatingRecord]) -> Result<f64, EvaluationError> {
    if records.is_empty() {
        return Err(EvaluationError::EmptyRecords);
    }
    let mut sum = 0.0;
    for r in records {
        sum += perception_score(r.opinion)?;
    }
    Ok(sum / records.len() as f64)
}

fn check(name: &'static str, value: f64, hi: f64) -> Result<(), EvaluationError> {
    if (0.0..=hi).contains(&value) {
        Ok(())
    } else {
        Err(EvaluationError::OutOfRange { name, value })
    }
}

pub fn objective_v(dr: f64, ur: f64, ps: f64) -> Result<f64, EvaluationError> {
    check("DR", dr, 1.0)?;
    check("UR", ur, 1.0)?;
    check("PS", ps, 2.5)?;
    Ok(dr + ur + ps / 2.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSummary")]
pub struct MetricSummary {
    #[serde(rename = "DR")]
    dr: f64,
    #[serde(rename = "UR")]
    ur: f64,
    #[serde(rename = "PS")]
    ps: f64,
    #[serde(rename = "V")]
    v: f64,
    records: usize,
}

#[derive(Deserialize)]
struct RawSummary {
    #[serde(rename = "DR")]
    dr: f64,
    #[serde(rename = "UR")]
    ur: f64,
    #[serde(rename = "PS")]
    ps: f64,
    #[serde(rename = "V")]
    v: f64,
    records: usize,
}

impl TryFrom<RawSummary> for MetricSummary {
    type Error = EvaluationError;

    fn try_from(raw: RawSummary) -> Result<Self, Self::Error> {
        let s = Self::new(raw.dr, raw.ur, raw.ps, raw.records)?;
        if s.v != raw.v {
            return Err(EvaluationError::InconsistentSummary {
                v: raw.v,
                expected: s.v,
            });
        }
        Ok(s)
    }
}

impl MetricSummary {
    pub fn new(dr: f64, ur: f64, ps: f64, records: usize) -> Result<Self, EvaluationError> {
        let v = objective_v(dr, ur, ps)?;
        Ok(Self {
            dr,
            ur,
            ps,
            v,
            records,
        })
    }

    pub fn from_records(records: &[RatingRecord]) -> Result<Self, EvaluationError> {
        Self::new(
            distinguishability_rate(records)?,
            understandability_rate(records)?,
            mean_perception_score(records)?,
            records.len(),
        )
    }

    pub fn dr(&self) -> f64 {
        self.dr
    }

    pub fn ur(&self) -> f64 {
        self.ur
    }

    pub fn ps(&self) -> f64 {
        self.ps
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    pub fn records(&self) -> usize {
        self.records
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perception_tent() {
        assert_eq!(perception_score(2.5).unwrap(), 2.5);
        assert_eq!(perception_score(0.0).unwrap(), 0.0);
        assert_eq!(perception_score(5.0).unwrap(), 0.0);
        assert_eq!(perception_score(4.0).unwrap(), 1.0);
        assert!(perception_score(5.01).is_err());
        assert!(perception_score(f64::NAN).is_err());
    }

    #[test]
    fn objective() {
        assert_eq!(objective_v(1.0, 1.0, 2.5).unwrap(), 3.0);
        assert_eq!(objective_v(0.0, 0.0, 0.0).unwrap(), 0.0);
        assert!((objective_v(0.9, 0.94, 2.0).unwrap() - 2.64).abs() < 1e-12);
        assert!(objective_v(1.1, 0.0, 0.0).is_err());
        assert!(objective_v(0.0, 0.0, 2.6).is_err());
    }

    #[test]
    fn summary_enforces_v() {
        let s = MetricSummary::new(0.9, 0.94, 2.0, 10).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<MetricSummary>(&json).unwrap(), s);
        let forged = json.replace(&format!("\"V\":{}", s.v()), "\"V\":2.0");
        assert!(serde_json::from_str::<MetricSummary>(&forged).is_err());
    }

    #[test]
    fn empty_records() {
        assert_eq!(
            distinguishability_rate(&[]),
            Err(EvaluationError::EmptyRecords)
        );
        assert_eq!(
            understandability_rate(&[]),
            Err(EvaluationError::EmptyRecords)
        );
    }
}

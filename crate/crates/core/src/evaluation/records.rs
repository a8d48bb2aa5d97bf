//! Rating rows as comma-separated text.
//!
//! Header: `participant_id,band,class_id,pitch,duration,energy,level,distinguished,understood,opinion`.
//! Either the three ratio columns or `level` must be filled; the others may
//! be empty. Flags accept `true`/`false`, `1`/`0` or `yes`/`no`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::EvaluationError;
use crate::phoneme::ClassId;
use crate::ratios::{ExaggerationLevel, ProficiencyBand, RatioTriple};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub participant_id: String,
    pub band: ProficiencyBand,
    pub class_id: ClassId,
    pub ratios: Option<RatioTriple>,
    pub level: Option<ExaggerationLevel>,
    pub distinguished: bool,
    pub understood: bool,
    pub opinion: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    participant_id: String,
    band: String,
    class_id: String,
    pitch: Option<f64>,
    duration: Option<f64>,
    energy: Option<f64>,
    level: Option<String>,
    distinguished: String,
    understood: String,
    opinion: f64,
}

fn flag(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Some(true),
        "false" | "0" | "no" => Some(false),
        _ => None,
    }
}

impl Row {
    fn into_record(self, row: usize) -> Result<RatingRecord, EvaluationError> {
        let err = |message: String| EvaluationError::Row { row, message };
        let band = self
            .band
            .parse::<ProficiencyBand>()
            .map_err(|e| err(e.to_string()))?;
        let ratios = match (self.pitch, self.duration, self.energy) {
            (Some(p), Some(d), Some(e)) => {
                Some(RatioTriple::new(p, d, e).map_err(|e| err(e.to_string()))?)
            }
            (None, None, None) => None,
            _ => return Err(err("ratio columns must be all filled or all empty".into())),
        };
        let level = match self.level.as_deref().map(str::trim) {
            None | Some("") => None,
            Some(l) => Some(
                l.parse::<ExaggerationLevel>()
                    .map_err(|e| err(e.to_string()))?,
            ),
        };
        if ratios.is_none() && level.is_none() {
            return Err(err("neither ratios nor level given".into()));
        }
        if !(0.0..=5.0).contains(&self.opinion) {
            return Err(err(format!("opinion {} outside [0, 5]", self.opinion)));
        }
        if self.class_id.trim().is_empty() {
            return Err(err("empty class_id".into()));
        }
        Ok(RatingRecord {
            participant_id: self.participant_id,
            band,
            class_id: ClassId::new(self.class_id.trim()),
            ratios,
            level,
            distinguished: flag(&self.distinguished)
                .ok_or_else(|| err(format!("bad flag {:?}", self.distinguished)))?,
            understood: flag(&self.understood)
                .ok_or_else(|| err(format!("bad flag {:?}", self.understood)))?,
            opinion: self.opinion,
        })
    }
}

pub fn read_ratings(reader: impl Read) -> Result<Vec<RatingRecord>, EvaluationError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    rdr.deserialize::<Row>()
        .enumerate()
        .map(|(i, row)| {
            // Row numbers count the header as row 1.
            let row_no = i + 2;
            row.map_err(|e| EvaluationError::Row {
                row: row_no,
                message: e.to_string(),
            })?
            .into_record(row_no)
        })
        .collect()
}

pub fn write_ratings(records: &[RatingRecord], writer: impl Write) -> Result<(), EvaluationError> {
    let mut w = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| EvaluationError::Csv(e.to_string());
    for r in records {
        w.serialize(Row {
            participant_id: r.participant_id.clone(),
            band: r.band.as_str().to_owned(),
            class_id: r.class_id.to_string(),
            pitch: r.ratios.map(|t| t.pitch_ratio),
            duration: r.ratios.map(|t| t.duration_ratio),
            energy: r.ratios.map(|t| t.energy_ratio),
            level: r.level.map(|l| l.as_str().to_owned()),
            distinguished: r.distinguished.to_string(),
            understood: r.understood.to_string(),
            opinion: r.opinion,
        })
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| EvaluationError::Csv(e.to_string()))
}

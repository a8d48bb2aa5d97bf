//! Interval text format for phone alignments.
//!
//! ```text
//! file     := line*
//! line     := blank | comment | tier | interval
//! comment  := '#' any*
//! tier     := "tier" ws name
//! interval := start ws end ws label     (start, end in seconds)
//! ```
//!
//! Intervals before any `tier` line belong to an implicit `phones` tier. When
//! several tiers are present the one named `phones` is used, otherwise the
//! first. Silence labels (`sil`, `sp`, `spn`, or an empty label written as
//! `""`) are skipped and trailing stress digits (`AH0`) are dropped.

use std::fmt::Write;

use super::{validate_segments, AlignmentError, PhonemeSegment};
use crate::phoneme::PhonemeClassTable;

const SILENCE: [&str; 4] = ["sil", "sp", "spn", "\"\""];

struct Tier {
    name: String,
    intervals: Vec<(usize, f64, f64, String)>,
}

fn seconds_to_ms(s: f64) -> f64 {
    (s * 1e6).round() / 1e3
}

/// Parses an interval document into validated segments.
pub fn load_alignment(
    document: &str,
    classes: &PhonemeClassTable,
) -> Result<Vec<PhonemeSegment>, AlignmentError> {
    let mut tiers: Vec<Tier> = Vec::new();
    for (i, raw) in document.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields[0] == "tier" {
            if fields.len() != 2 {
                return Err(AlignmentError::Parse {
                    line: line_no,
                    message: "expected `tier <name>`".into(),
                });
            }
            tiers.push(Tier {
                name: fields[1].to_owned(),
                intervals: Vec::new(),
            });
            continue;
        }
        if fields.len() != 3 {
            return Err(AlignmentError::Parse {
                line: line_no,
                message: format!(
                    "expected `<start> <end> <label>`, got {} fields",
                    fields.len()
                ),
            });
        }
        let parse_time = |s: &str| -> Result<f64, AlignmentError> {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| AlignmentError::Parse {
                    line: line_no,
                    message: format!("invalid time `{s}`"),
                })
        };
        let start = parse_time(fields[0])?;
        let end = parse_time(fields[1])?;
        if tiers.is_empty() {
            tiers.push(Tier {
                name: "phones".into(),
                intervals: Vec::new(),
            });
        }
        tiers
            .last_mut()
            .unwrap()
            .intervals
            .push((line_no, start, end, fields[2].to_owned()));
    }

    let tier = match tiers.iter().position(|t| t.name == "phones") {
        Some(i) => tiers.swap_remove(i),
        None if !tiers.is_empty() => tiers.swap_remove(0),
        None => return Err(AlignmentError::EmptySegments),
    };

    let mut segments = Vec::new();
    for (line, start, end, label) in tier.intervals {
        if SILENCE.contains(&label.to_ascii_lowercase().as_str()) {
            continue;
        }
        let symbol = label.trim_end_matches(|c: char| c.is_ascii_digit());
        let phoneme = classes
            .phoneme(&symbol.to_ascii_uppercase())
            .map_err(|source| AlignmentError::Phoneme { line, source })?;
        let (start_ms, end_ms) = (seconds_to_ms(start), seconds_to_ms(end));
        if start_ms < 0.0 || start_ms >= end_ms {
            return Err(AlignmentError::Parse {
                line,
                message: format!("interval must satisfy 0 <= start < end, got {start} {end}"),
            });
        }
        segments.push(PhonemeSegment::new(phoneme, start_ms, end_ms));
    }
    validate_segments(&segments)?;
    Ok(segments)
}

/// Writes segments as a single `phones` tier.
pub fn format_alignment(segments: &[PhonemeSegment]) -> String {
    let mut out = String::from("tier phones\n");
    for s in segments {
        writeln!(
            out,
            "{:.6} {:.6} {}",
            s.start_ms / 1000.0,
            s.end_ms / 1000.0,
            s.phoneme.symbol
        )
        .unwrap();
    }
    out
}

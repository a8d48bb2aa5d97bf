//! Phoneme boundaries in learner audio.
//!
//! Boundaries known for a reference recording are carried over to a learner
//! recording of the same phoneme sequence by warping their feature sequences
//! onto each other. Alignments produced by external tools can be imported
//! through the interval text format in [`interval`].

mod dtw;
pub mod features;
pub mod interval;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::AudioBuffer;
use crate::phoneme::{Phoneme, PhonemeError};

pub use dtw::{dtw, WarpPath};
pub use features::{extract_features, FeatureConfig, FeatureExtractor, FeatureMatrix};
pub use interval::{format_alignment, load_alignment};

/// Shortest audio `align` accepts.
pub const MIN_ALIGN_MS: f64 = 100.0;

#[derive(Debug, Error, PartialEq)]
pub enum AlignmentError {
    #[error("audio too short: need at least {needed_ms} ms, got {got_ms} ms")]
    TooShort { needed_ms: f64, got_ms: f64 },
    #[error("no phoneme segments")]
    EmptySegments,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("segments overlap: {first} and {second}")]
    Overlap { first: String, second: String },
    #[error("invalid segment {0}")]
    InvalidSegment(String),
    #[error("line {line}: {source}")]
    Phoneme { line: usize, source: PhonemeError },
    #[error("sample rates differ: {0} Hz vs {1} Hz")]
    RateMismatch(u32, u32),
}

/// A phoneme occupying `[start_ms, end_ms)` of an utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhonemeSegment {
    pub phoneme: Phoneme,
    pub start_ms: f64,
    pub end_ms: f64,
}

impl PhonemeSegment {
    pub fn new(phoneme: Phoneme, start_ms: f64, end_ms: f64) -> Self {
        Self {
            phoneme,
            start_ms,
            end_ms,
        }
    }

    pub fn duration_ms(&self) -> f64 {
        self.end_ms - self.start_ms
    }

    pub fn symbol(&self) -> &str {
        &self.phoneme.symbol
    }

    fn describe(&self) -> String {
        format!(
            "{} [{:.3}, {:.3}) ms",
            self.phoneme.symbol, self.start_ms, self.end_ms
        )
    }
}

/// Checks `0 <= start < end`, time order, and non-overlap.
pub fn validate_segments(segments: &[PhonemeSegment]) -> Result<(), AlignmentError> {
    if segments.is_empty() {
        return Err(AlignmentError::EmptySegments);
    }
    for seg in segments {
        if !(seg.start_ms.is_finite() && seg.end_ms.is_finite())
            || seg.start_ms < 0.0
            || seg.start_ms >= seg.end_ms
        {
            return Err(AlignmentError::InvalidSegment(seg.describe()));
        }
    }
    for pair in segments.windows(2) {
        if pair[1].start_ms < pair[0].end_ms {
            return Err(AlignmentError::Overlap {
                first: pair[0].describe(),
                second: pair[1].describe(),
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult {
    pub segments: Vec<PhonemeSegment>,
    /// Total warping path cost divided by path length.
    pub warp_cost: f64,
}

/// Transfers `reference_segments` onto `learner` through a DTW path.
pub fn align(
    learner: &AudioBuffer,
    reference: &AudioBuffer,
    reference_segments: &[PhonemeSegment],
) -> Result<AlignmentResult, AlignmentError> {
    align_with(
        learner,
        reference,
        reference_segments,
        &FeatureConfig::default(),
    )
}

pub fn align_with(
    learner: &AudioBuffer,
    reference: &AudioBuffer,
    reference_segments: &[PhonemeSegment],
    config: &FeatureConfig,
) -> Result<AlignmentResult, AlignmentError> {
    for audio in [learner, reference] {
        if audio.duration_ms() < MIN_ALIGN_MS {
            return Err(AlignmentError::TooShort {
                needed_ms: MIN_ALIGN_MS,
                got_ms: audio.duration_ms(),
            });
        }
    }
    if learner.sample_rate() != reference.sample_rate() {
        return Err(AlignmentError::RateMismatch(
            learner.sample_rate(),
            reference.sample_rate(),
        ));
    }
    validate_segments(reference_segments)?;
    if let Some(last) = reference_segments.last() {
        if last.end_ms > reference.duration_ms() + 1e-6 {
            return Err(AlignmentError::InvalidSegment(format!(
                "{} ends after the reference audio ({:.3} ms)",
                last.describe(),
                reference.duration_ms()
            )));
        }
    }

    let extractor = FeatureExtractor::new(*config, reference.sample_rate());
    let ref_feats = extractor.extract(reference)?;
    let learner_feats = extractor.extract(learner)?;
    let path = dtw(&ref_feats.frames, &learner_feats.frames);

    let mapped = path.mean_target_per_source(ref_feats.len());
    let transfer = |ms: f64| -> f64 {
        let last = (ref_feats.len() - 1) as f64;
        let x = ref_feats.frame_at_ms(ms).clamp(0.0, last);
        let f0 = x.floor() as usize;
        let f1 = (f0 + 1).min(ref_feats.len() - 1);
        let d0 = mapped[f0] - f0 as f64;
        let d1 = mapped[f1] - f1 as f64;
        let delta = if f1 == f0 {
            d0
        } else {
            d0 + (x - f0 as f64) * (d1 - d0)
        };
        ms + delta * config.hop_ms
    };

    let duration = learner.duration_ms();
    let mut bounds: Vec<(f64, f64)> = reference_segments
        .iter()
        .map(|s| {
            (
                transfer(s.start_ms).clamp(0.0, duration),
                transfer(s.end_ms).clamp(0.0, duration),
            )
        })
        .collect();
    enforce_min_length(&mut bounds, config.hop_ms, duration)?;

    let segments = reference_segments
        .iter()
        .zip(bounds)
        .map(|(s, (start, end))| PhonemeSegment::new(s.phoneme.clone(), start, end))
        .collect();
    Ok(AlignmentResult {
        segments,
        warp_cost: path.cost_per_step(),
    })
}

/// Restores order and a minimum segment length after boundary mapping.
fn enforce_min_length(
    bounds: &mut [(f64, f64)],
    min_len: f64,
    duration: f64,
) -> Result<(), AlignmentError> {
    if bounds.len() as f64 * min_len > duration {
        return Err(AlignmentError::TooShort {
            needed_ms: bounds.len() as f64 * min_len,
            got_ms: duration,
        });
    }
    let mut prev_end = 0.0f64;
    for b in bounds.iter_mut() {
        b.0 = b.0.max(prev_end);
        b.1 = b.1.max(b.0 + min_len);
        prev_end = b.1;
    }
    let mut next_start = duration;
    for b in bounds.iter_mut().rev() {
        b.1 = b.1.min(next_start);
        b.0 = b.0.min(b.1 - min_len);
        next_start = b.0;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phoneme::PhonemeClassTable;

    fn seg(symbol: &str, start: f64, end: f64) -> PhonemeSegment {
        let table = PhonemeClassTable::default();
        PhonemeSegment::new(table.phoneme(symbol).unwrap(), start, end)
    }

    #[test]
    fn validation_catches_overlap_and_inversion() {
        assert!(validate_segments(&[seg("P", 0.0, 10.0), seg("IY", 10.0, 30.0)]).is_ok());
        assert!(matches!(
            validate_segments(&[seg("P", 0.0, 20.0), seg("IY", 10.0, 30.0)]),
            Err(AlignmentError::Overlap { .. })
        ));
        assert!(matches!(
            validate_segments(&[seg("P", 20.0, 20.0)]),
            Err(AlignmentError::InvalidSegment(_))
        ));
        assert_eq!(validate_segments(&[]), Err(AlignmentError::EmptySegments));
    }

    #[test]
    fn min_length_enforced_on_collapsed_bounds() {
        let mut b = vec![(100.0, 100.0), (100.0, 100.0), (100.0, 130.0)];
        enforce_min_length(&mut b, 10.0, 500.0).unwrap();
        assert_eq!(b, vec![(100.0, 110.0), (110.0, 120.0), (120.0, 130.0)]);

        let mut b = vec![(480.0, 500.0), (500.0, 500.0)];
        enforce_min_length(&mut b, 10.0, 500.0).unwrap();
        assert_eq!(b, vec![(480.0, 490.0), (490.0, 500.0)]);
    }

    #[test]
    fn too_short_audio() {
        let short = AudioBuffer::new(vec![0.0; 800], 16_000).unwrap();
        let long = AudioBuffer::new(vec![0.0; 8000], 16_000).unwrap();
        assert!(matches!(
            align(&short, &long, &[seg("P", 0.0, 100.0)]),
            Err(AlignmentError::TooShort { .. })
        ));
    }

    #[test]
    fn empty_segments() {
        let a = AudioBuffer::new(vec![0.0; 8000], 16_000).unwrap();
        assert_eq!(align(&a, &a, &[]), Err(AlignmentError::EmptySegments));
    }
}

//! Template-matching phoneme scorer.

use std::collections::BTreeMap;

use super::{DiagnosisError, PhonemeScore};
use crate::alignment::{dtw, FeatureConfig, FeatureExtractor, FeatureMatrix, PhonemeSegment};
use crate::audio::AudioBuffer;

/// Distance scored 50 by the default calibration.
pub const DEFAULT_MIDPOINT: f64 = 10.0;
/// Distance change that moves the default score by a factor of e in odds.
pub const DEFAULT_SCALE: f64 = 2.0;

/// Maps a distance `d` to `100 / (1 + exp((d - midpoint) / scale))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticCalibration {
    pub midpoint: f64,
    pub scale: f64,
}

impl Default for LogisticCalibration {
    fn default() -> Self {
        Self {
            midpoint: DEFAULT_MIDPOINT,
            scale: DEFAULT_SCALE,
        }
    }
}

impl LogisticCalibration {
    /// Midpoint at the median distance, scale at the median absolute deviation.
    pub fn from_distances(distances: &[f64]) -> Result<Self, DiagnosisError> {
        let median = |v: &mut Vec<f64>| {
            v.sort_by(f64::total_cmp);
            let n = v.len();
            if n % 2 == 1 {
                v[n / 2]
            } else {
                0.5 * (v[n / 2 - 1] + v[n / 2])
            }
        };
        let mut d: Vec<f64> = distances
            .iter()
            .copied()
            .filter(|x| x.is_finite())
            .collect();
        if d.len() < 2 {
            return Err(DiagnosisError::DegenerateCalibration);
        }
        let midpoint = median(&mut d);
        let mut dev: Vec<f64> = d.iter().map(|x| (x - midpoint).abs()).collect();
        let scale = median(&mut dev);
        if scale <= 0.0 {
            return Err(DiagnosisError::DegenerateCalibration);
        }
        Ok(Self { midpoint, scale })
    }

    pub fn score(&self, distance: f64) -> PhonemeScore {
        let s = 100.0 / (1.0 + ((distance - self.midpoint) / self.scale).exp());
        PhonemeScore::new(s.clamp(0.0, 100.0)).expect("clamped")
    }
}

/// Scores one aligned learner segment against reference templates.
pub trait PhonemeScorer {
    fn score(
        &self,
        learner: &AudioBuffer,
        segment: &PhonemeSegment,
        templates: &[FeatureMatrix],
    ) -> Result<PhonemeScore, DiagnosisError>;
}

/// Reference feature sequences per phoneme symbol.
#[derive(Debug, Clone, Default)]
pub struct TemplateBank {
    templates: BTreeMap<String, Vec<FeatureMatrix>>,
    config: FeatureConfig,
}

impl TemplateBank {
    pub fn new(config: FeatureConfig) -> Self {
        Self {
            templates: BTreeMap::new(),
            config,
        }
    }

    /// Adds one template per segment of an annotated reference recording.
    pub fn add_reference(
        &mut self,
        audio: &AudioBuffer,
        segments: &[PhonemeSegment],
    ) -> Result<(), DiagnosisError> {
        let extractor = FeatureExtractor::new(self.config, audio.sample_rate());
        for seg in segments {
            let features = segment_features(&extractor, &self.config, audio, seg)?;
            self.templates
                .entry(seg.symbol().to_owned())
                .or_default()
                .push(features);
        }
        Ok(())
    }

    pub fn from_reference(
        audio: &AudioBuffer,
        segments: &[PhonemeSegment],
    ) -> Result<Self, DiagnosisError> {
        let mut bank = Self::default();
        bank.add_reference(audio, segments)?;
        Ok(bank)
    }

    pub fn get(&self, symbol: &str) -> Option<&[FeatureMatrix]> {
        self.templates.get(symbol).map(Vec::as_slice)
    }

    pub fn symbols(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }
}

/// Log-mel features of a segment, widened symmetrically to at least two
/// frames when the segment itself is shorter.
pub(crate) fn segment_features(
    extractor: &FeatureExtractor,
    config: &FeatureConfig,
    audio: &AudioBuffer,
    seg: &PhonemeSegment,
) -> Result<FeatureMatrix, DiagnosisError> {
    let min_ms = config.window_ms + config.hop_ms;
    let (mut start, mut end) = (seg.start_ms, seg.end_ms);
    if end - start < min_ms {
        let pad = 0.5 * (min_ms - (end - start));
        start -= pad;
        end += pad;
        let total = audio.duration_ms();
        if start < 0.0 {
            end -= start;
            start = 0.0;
        }
        if end > total {
            start = (start - (end - total)).max(0.0);
            end = total;
        }
    }
    Ok(extractor.extract(&audio.slice_ms(start, end))?)
}

/// Scores by the smallest DTW mean frame distance to any template.
#[derive(Debug, Clone, Default)]
pub struct TemplateScorer {
    pub features: FeatureConfig,
    pub calibration: LogisticCalibration,
}

impl TemplateScorer {
    pub fn new(calibration: LogisticCalibration) -> Self {
        Self {
            features: FeatureConfig::default(),
            calibration,
        }
    }

    /// Mean Euclidean log-mel distance along the best warp to the closest template.
    pub fn distance(
        &self,
        learner: &AudioBuffer,
        segment: &PhonemeSegment,
        templates: &[FeatureMatrix],
    ) -> Result<f64, DiagnosisError> {
        if templates.is_empty() {
            return Err(DiagnosisError::MissingTemplate(segment.symbol().to_owned()));
        }
        let extractor = FeatureExtractor::new(self.features, learner.sample_rate());
        let features = segment_features(&extractor, &self.features, learner, segment)?;
        Ok(templates
            .iter()
            .map(|t| dtw(&features.frames, &t.frames).cost_per_step())
            .fold(f64::INFINITY, f64::min))
    }
}

impl PhonemeScorer for TemplateScorer {
    fn score(
        &self,
        learner: &AudioBuffer,
        segment: &PhonemeSegment,
        templates: &[FeatureMatrix],
    ) -> Result<PhonemeScore, DiagnosisError> {
        Ok(self
            .calibration
            .score(self.distance(learner, segment, templates)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logistic_midpoint_is_fifty() {
        let c = LogisticCalibration::default();
        assert!((c.score(DEFAULT_MIDPOINT).value() - 50.0).abs() < 1e-12);
        assert!(c.score(0.0).value() > 95.0);
        assert!(c.score(1e6).value() == 0.0);
    }

    #[test]
    fn calibration_from_distances() {
        let c = LogisticCalibration::from_distances(&[1.0, 2.0, 3.0, 4.0, 10.0]).unwrap();
        assert_eq!(c.midpoint, 3.0);
        assert_eq!(c.scale, 1.0);
        assert!(LogisticCalibration::from_distances(&[2.0, 2.0, 2.0]).is_err());
    }
}

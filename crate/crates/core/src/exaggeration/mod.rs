//! Pitch, duration, and energy exaggeration of one phoneme segment.
//!
//! The transforms are judged by measurable contracts rather than by their
//! internals: duration scales by `duration_ratio` without moving f0, mean f0
//! scales by `pitch_ratio` without changing duration, and RMS scales by
//! `energy_ratio`. [`apply_plan`] runs them in the order duration, pitch,
//! energy on the target segment of a reference utterance and splices the
//! result back with equal-power crossfades.

mod f0;
mod wsola;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::PhonemeSegment;
use crate::audio::{self, AudioBuffer};
use crate::ratios::{ProficiencyBand, RatioTable, RatioTriple, MAX_RATIO, MIN_RATIO};

pub use f0::{estimate_f0, estimate_f0_with, F0Config, F0Track, F0_MAX_HZ, F0_MIN_HZ};
pub use wsola::WsolaConfig;

pub const DEFAULT_CROSSFADE_MS: f64 = 10.0;

/// Samples above this magnitude go through the soft limiter.
pub const LIMITER_KNEE: f64 = 0.99;

/// RMS below −60 dBFS counts as silence.
pub const SILENCE_RMS: f64 = 1e-3;

#[derive(Debug, Error, PartialEq)]
pub enum ExaggerationError {
    #[error("{name} ratio {value} outside [{MIN_RATIO}, {MAX_RATIO}]")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("segment too short: need at least {needed_ms} ms, got {got_ms} ms")]
    TooShort { needed_ms: f64, got_ms: f64 },
    #[error("target segment is not part of the reference alignment")]
    TargetNotFound,
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
}

/// Non-fatal conditions reported alongside a transform's output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Warning {
    /// No voiced frames; pitch left unchanged.
    Unvoiced,
    /// Below −60 dBFS; energy left unchanged.
    SilentSegment,
    /// Too short for overlap-add; duration changed by plain resampling.
    ShortSegmentFallback,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Processed {
    pub audio: AudioBuffer,
    pub warnings: Vec<Warning>,
}

impl Processed {
    fn clean(audio: AudioBuffer) -> Self {
        Self {
            audio,
            warnings: Vec::new(),
        }
    }

    fn warned(audio: AudioBuffer, warning: Warning) -> Self {
        Self {
            audio,
            warnings: vec![warning],
        }
    }
}

fn check_ratio(name: &'static str, value: f64) -> Result<(), ExaggerationError> {
    if (MIN_RATIO..=MAX_RATIO).contains(&value) {
        Ok(())
    } else {
        Err(ExaggerationError::OutOfRange { name, value })
    }
}

/// Identity up to `LIMITER_KNEE`, then a tanh knee saturating at 1.
pub fn soft_limit(x: f64) -> f64 {
    let a = x.abs();
    if a <= LIMITER_KNEE {
        x
    } else {
        let headroom = 1.0 - LIMITER_KNEE;
        x.signum() * (LIMITER_KNEE + headroom * ((a - LIMITER_KNEE) / headroom).tanh())
    }
}

fn limited(samples: &[f64], rate: u32) -> AudioBuffer {
    let out: Vec<f32> = samples
        .iter()
        .map(|&v| (soft_limit(v) as f32).clamp(-1.0, 1.0))
        .collect();
    AudioBuffer::from_valid(out, rate)
}

/// Time-scale modification preserving pitch.
pub fn stretch_duration(
    segment: &AudioBuffer,
    duration_ratio: f64,
) -> Result<AudioBuffer, ExaggerationError> {
    stretch_duration_with(segment, duration_ratio, &WsolaConfig::default())
}

pub fn stretch_duration_with(
    segment: &AudioBuffer,
    duration_ratio: f64,
    config: &WsolaConfig,
) -> Result<AudioBuffer, ExaggerationError> {
    check_ratio("duration", duration_ratio)?;
    if duration_ratio == 1.0 {
        return Ok(segment.clone());
    }
    let out = wsola::wsola(
        &segment.to_f64(),
        duration_ratio,
        segment.sample_rate(),
        config,
    )?;
    Ok(limited(&out, segment.sample_rate()))
}

/// Scales f0 by `pitch_ratio` keeping the duration: overlap-add stretch by
/// the ratio, then resample back to the original length.
pub fn shift_pitch(
    segment: &AudioBuffer,
    pitch_ratio: f64,
) -> Result<Processed, ExaggerationError> {
    shift_pitch_with(segment, pitch_ratio, &WsolaConfig::default())
}

pub fn shift_pitch_with(
    segment: &AudioBuffer,
    pitch_ratio: f64,
    config: &WsolaConfig,
) -> Result<Processed, ExaggerationError> {
    check_ratio("pitch", pitch_ratio)?;
    if pitch_ratio == 1.0 {
        return Ok(Processed::clean(segment.clone()));
    }
    let voiced = estimate_f0(segment)
        .map(|t| t.voiced_count() > 0)
        .unwrap_or(false);
    if !voiced {
        return Ok(Processed::warned(segment.clone(), Warning::Unvoiced));
    }
    let x = segment.to_f64();
    let stretched = wsola::wsola(&x, pitch_ratio, segment.sample_rate(), config)?;
    let out = audio::resample_by(&stretched, pitch_ratio, x.len());
    Ok(Processed::clean(limited(&out, segment.sample_rate())))
}

/// Multiplies the waveform by `energy_ratio`, soft-limiting above |0.99|.
pub fn scale_energy(
    segment: &AudioBuffer,
    energy_ratio: f64,
) -> Result<Processed, ExaggerationError> {
    check_ratio("energy", energy_ratio)?;
    if energy_ratio == 1.0 {
        return Ok(Processed::clean(segment.clone()));
    }
    if segment.rms() < SILENCE_RMS {
        return Ok(Processed::warned(segment.clone(), Warning::SilentSegment));
    }
    let out: Vec<f64> = segment
        .samples()
        .iter()
        .map(|&s| s as f64 * energy_ratio)
        .collect();
    Ok(Processed::clean(limited(&out, segment.sample_rate())))
}

/// Which segment to exaggerate, by how much, and how to splice it back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExaggerationPlan {
    pub target: PhonemeSegment,
    pub ratios: RatioTriple,
    pub crossfade_ms: f64,
}

pub fn plan_exaggeration(
    reference_segments: &[PhonemeSegment],
    target: &PhonemeSegment,
    band: ProficiencyBand,
    table: &RatioTable,
) -> Result<ExaggerationPlan, ExaggerationError> {
    if !reference_segments.contains(target) {
        return Err(ExaggerationError::TargetNotFound);
    }
    let ratios = table.get(band, &target.phoneme.class_id).ok_or_else(|| {
        ExaggerationError::InvalidPlan(format!(
            "ratio table has no entry for class `{}`",
            target.phoneme.class_id
        ))
    })?;
    Ok(ExaggerationPlan {
        target: target.clone(),
        ratios,
        crossfade_ms: DEFAULT_CROSSFADE_MS.min(target.duration_ms() / 2.0),
    })
}

/// Exaggerated utterance and where the target now sits in it.
#[derive(Debug, Clone, PartialEq)]
pub struct Exaggerated {
    pub audio: AudioBuffer,
    pub target_start_ms: f64,
    pub target_end_ms: f64,
    pub warnings: Vec<Warning>,
}

pub fn apply_plan(
    reference: &AudioBuffer,
    plan: &ExaggerationPlan,
) -> Result<Exaggerated, ExaggerationError> {
    let ratios = plan.ratios;
    check_ratio("pitch", ratios.pitch_ratio)?;
    check_ratio("duration", ratios.duration_ratio)?;
    check_ratio("energy", ratios.energy_ratio)?;
    let target = &plan.target;
    if target.start_ms < 0.0
        || target.start_ms >= target.end_ms
        || target.end_ms > reference.duration_ms() + 1e-6
    {
        return Err(ExaggerationError::InvalidPlan(format!(
            "target [{}, {}) ms outside reference of {} ms",
            target.start_ms,
            target.end_ms,
            reference.duration_ms()
        )));
    }
    if !(0.0..=target.duration_ms() / 2.0).contains(&plan.crossfade_ms) {
        return Err(ExaggerationError::InvalidPlan(format!(
            "crossfade {} ms exceeds half the target duration",
            plan.crossfade_ms
        )));
    }

    if ratios.is_identity() {
        return Ok(Exaggerated {
            audio: reference.clone(),
            target_start_ms: target.start_ms,
            target_end_ms: target.end_ms,
            warnings: Vec::new(),
        });
    }

    let rate = reference.sample_rate();
    let s = reference.ms_to_index(target.start_ms);
    let e = reference.ms_to_index(target.end_ms);
    if e <= s {
        return Err(ExaggerationError::TooShort {
            needed_ms: 1000.0 / rate as f64,
            got_ms: target.duration_ms(),
        });
    }
    let segment = AudioBuffer::from_valid(reference.samples()[s..e].to_vec(), rate);
    let config = WsolaConfig::for_length(segment.duration_ms());
    let mut warnings = Vec::new();

    let stretched = match stretch_duration_with(&segment, ratios.duration_ratio, &config) {
        Ok(a) => a,
        Err(ExaggerationError::TooShort { .. }) => {
            warnings.push(Warning::ShortSegmentFallback);
            let x = segment.to_f64();
            let n = (x.len() as f64 * ratios.duration_ratio).round() as usize;
            limited(
                &audio::resample_by(&x, 1.0 / ratios.duration_ratio, n),
                rate,
            )
        }
        Err(err) => return Err(err),
    };
    let pitched = match shift_pitch_with(
        &stretched,
        ratios.pitch_ratio,
        &WsolaConfig::for_length(stretched.duration_ms()),
    ) {
        Ok(p) => p,
        Err(ExaggerationError::TooShort { .. }) => {
            Processed::warned(stretched.clone(), Warning::ShortSegmentFallback)
        }
        Err(err) => return Err(err),
    };
    warnings.extend(pitched.warnings);
    let energized = scale_energy(&pitched.audio, ratios.energy_ratio)?;
    warnings.extend(energized.warnings);
    warnings.dedup();

    let new_seg = energized.audio.to_f64();
    let original = reference.to_f64();
    let fade = ((plan.crossfade_ms * rate as f64 / 1000.0).round() as usize)
        .min(new_seg.len() / 2)
        .min((e - s) / 2);

    let mut body = new_seg.clone();
    let gain = |k: usize| {
        let t = (k as f64 + 0.5) / fade as f64 * std::f64::consts::FRAC_PI_2;
        (t.cos(), t.sin())
    };
    let tail = body.len() - fade;
    for k in 0..fade {
        let (g_out, g_in) = gain(k);
        // Original head fades out under the exaggerated head.
        body[k] = soft_limit(original[s + k] * g_out + new_seg[k] * g_in);
        // Exaggerated tail fades out into the original tail.
        body[tail + k] = soft_limit(new_seg[tail + k] * g_out + original[e - fade + k] * g_in);
    }

    // Samples outside the target are copied through untouched.
    let samples: Vec<f32> = reference.samples()[..s]
        .iter()
        .copied()
        .chain(body.iter().map(|&v| (v as f32).clamp(-1.0, 1.0)))
        .chain(reference.samples()[e..].iter().copied())
        .collect();

    Ok(Exaggerated {
        audio: AudioBuffer::from_valid(samples, rate),
        target_start_ms: s as f64 * 1000.0 / rate as f64,
        target_end_ms: (s + body.len()) as f64 * 1000.0 / rate as f64,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phoneme::PhonemeClassTable;
    use crate::synth;

    fn buf(x: &[f64]) -> AudioBuffer {
        AudioBuffer::from_f64(x, 16_000).unwrap()
    }

    #[test]
    fn limiter_contract() {
        assert_eq!(soft_limit(0.5), 0.5);
        assert_eq!(soft_limit(-0.99), -0.99);
        assert!(soft_limit(5.0) <= 1.0);
        assert!(soft_limit(-5.0) >= -1.0);
        assert!(soft_limit(0.995) < 0.995 && soft_limit(0.995) > 0.99);
        assert!(soft_limit(1.0) > 0.99);
    }

    #[test]
    fn identity_ratios_pass_through() {
        let a = buf(&synth::pulse_train_vowel(120.0, 200.0, 0.5, 16_000));
        assert_eq!(stretch_duration(&a, 1.0).unwrap(), a);
        assert_eq!(shift_pitch(&a, 1.0).unwrap().audio, a);
        assert_eq!(scale_energy(&a, 1.0).unwrap().audio, a);
    }

    #[test]
    fn out_of_range_ratios() {
        let a = buf(&synth::pulse_train_vowel(120.0, 200.0, 0.5, 16_000));
        assert_eq!(
            stretch_duration(&a, 3.5),
            Err(ExaggerationError::OutOfRange {
                name: "duration",
                value: 3.5
            })
        );
        assert!(shift_pitch(&a, 0.4).is_err());
        assert!(scale_energy(&a, 3.01).is_err());
    }

    #[test]
    fn stretch_too_short() {
        let a = buf(&synth::tone(200.0, 40.0, 0.5, 16_000));
        assert!(matches!(
            stretch_duration(&a, 1.5),
            Err(ExaggerationError::TooShort { .. })
        ));
    }

    #[test]
    fn noise_is_unvoiced_for_pitch() {
        let a = buf(&synth::white_noise(200.0, 0.3, 16_000, 9));
        let p = shift_pitch(&a, 1.3).unwrap();
        assert_eq!(p.audio, a);
        assert_eq!(p.warnings, vec![Warning::Unvoiced]);
    }

    #[test]
    fn silence_is_flagged_for_energy() {
        let a = buf(&vec![0.0005; 3200]);
        let p = scale_energy(&a, 2.0).unwrap();
        assert_eq!(p.audio, a);
        assert_eq!(p.warnings, vec![Warning::SilentSegment]);
    }

    #[test]
    fn full_scale_energy_never_clips() {
        let a = buf(&synth::tone(300.0, 100.0, 0.98, 16_000));
        let p = scale_energy(&a, 2.0).unwrap();
        assert!(p.audio.samples().iter().all(|s| s.abs() <= 1.0));
    }

    #[test]
    fn plan_clamps_crossfade_and_uses_table() {
        let classes = PhonemeClassTable::default();
        let p = classes.phoneme("P").unwrap();
        let segs = vec![
            PhonemeSegment::new(p.clone(), 100.0, 115.0),
            PhonemeSegment::new(classes.phoneme("IY").unwrap(), 115.0, 300.0),
        ];
        let table = RatioTable::default_table();
        let plan = plan_exaggeration(&segs, &segs[0], ProficiencyBand::Low, &table).unwrap();
        assert_eq!(plan.crossfade_ms, 7.5);
        assert_eq!(plan.ratios.pitch_ratio, 1.26);

        let identity = RatioTable::identity(&classes);
        let plan = plan_exaggeration(&segs, &segs[1], ProficiencyBand::High, &identity).unwrap();
        assert_eq!(plan.ratios, RatioTriple::IDENTITY);
        assert_eq!(plan.crossfade_ms, 10.0);

        let stray = PhonemeSegment::new(p, 0.0, 50.0);
        assert_eq!(
            plan_exaggeration(&segs, &stray, ProficiencyBand::Low, &table),
            Err(ExaggerationError::TargetNotFound)
        );
    }

    #[test]
    fn very_short_target_still_exaggerated() {
        let classes = PhonemeClassTable::default();
        let utt = synth::synthesize_timed(
            &[("AA", 150.0), ("T", 8.0), ("IY", 150.0)],
            &classes,
            &synth::SynthOptions::default(),
        )
        .unwrap();
        let plan = ExaggerationPlan {
            target: utt.segments[1].clone(),
            ratios: RatioTriple::new(1.2, 1.5, 1.3).unwrap(),
            crossfade_ms: 4.0,
        };
        let out = apply_plan(&utt.audio, &plan).unwrap();
        assert!(out.warnings.contains(&Warning::ShortSegmentFallback));
        assert_eq!(out.audio.len(), utt.audio.len() + 64);
    }
}

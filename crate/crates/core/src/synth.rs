//! Deterministic speech-like signal synthesis.
//!
//! Stands in for recorded reference utterances in fixtures, the bundled
//! sample courses, and the demo. Sonorants are harmonic series under a
//! three-formant envelope, obstruents are band-passed noise with optional
//! voicing, stops are a closure followed by a burst. Every phoneme class has
//! a distinct spectral signature so that alignment and scoring behave
//! sensibly on the output.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::alignment::PhonemeSegment;
use crate::audio::AudioBuffer;
use crate::phoneme::{PhonemeClassTable, PhonemeError};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOptions {
    pub sample_rate: u32,
    pub f0_hz: f64,
    /// Multiplies every phoneme duration.
    pub tempo: f64,
    pub lead_silence_ms: f64,
    pub tail_silence_ms: f64,
    pub peak: f64,
    pub seed: u64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            sample_rate: 16_000,
            f0_hz: 120.0,
            tempo: 1.0,
            lead_silence_ms: 100.0,
            tail_silence_ms: 100.0,
            peak: 0.5,
            seed: 1,
        }
    }
}

/// Synthesized audio with its exact phoneme boundaries.
#[derive(Debug, Clone)]
pub struct Utterance {
    pub audio: AudioBuffer,
    pub segments: Vec<PhonemeSegment>,
}

enum Sound {
    Sonorant {
        formants: [f64; 3],
        gain: f64,
    },
    Fricative {
        center: f64,
        q: f64,
        gain: f64,
        voiced: bool,
    },
    Stop {
        burst: f64,
        voiced: bool,
    },
    Affricate {
        center: f64,
        voiced: bool,
    },
}

fn sound(symbol: &str) -> Sound {
    use Sound::*;
    let son = |f1, f2, f3, gain| Sonorant {
        formants: [f1, f2, f3],
        gain,
    };
    match symbol {
        "IY" => son(270.0, 2290.0, 3010.0, 1.0),
        "IH" => son(390.0, 1990.0, 2550.0, 1.0),
        "EH" => son(530.0, 1840.0, 2480.0, 1.0),
        "AE" => son(660.0, 1720.0, 2410.0, 1.0),
        "AH" => son(520.0, 1190.0, 2390.0, 1.0),
        "AA" => son(730.0, 1090.0, 2440.0, 1.0),
        "AO" => son(570.0, 840.0, 2410.0, 1.0),
        "UH" => son(440.0, 1020.0, 2240.0, 1.0),
        "UW" => son(300.0, 870.0, 2240.0, 1.0),
        "ER" => son(490.0, 1350.0, 1690.0, 1.0),
        "AW" => son(650.0, 1000.0, 2400.0, 1.0),
        "AY" => son(600.0, 1500.0, 2500.0, 1.0),
        "EY" => son(450.0, 2000.0, 2550.0, 1.0),
        "OW" => son(500.0, 900.0, 2300.0, 1.0),
        "OY" => son(500.0, 1200.0, 2400.0, 1.0),
        "L" => son(360.0, 1300.0, 2700.0, 0.6),
        "R" => son(420.0, 1300.0, 1600.0, 0.7),
        "W" => son(300.0, 700.0, 2200.0, 0.6),
        "Y" => son(280.0, 2200.0, 2900.0, 0.6),
        "M" => son(250.0, 1000.0, 2200.0, 0.4),
        "N" => son(250.0, 1500.0, 2500.0, 0.4),
        "NG" => son(250.0, 2000.0, 2700.0, 0.4),
        "S" => Fricative {
            center: 6000.0,
            q: 2.0,
            gain: 0.5,
            voiced: false,
        },
        "Z" => Fricative {
            center: 6000.0,
            q: 2.0,
            gain: 0.4,
            voiced: true,
        },
        "SH" => Fricative {
            center: 3000.0,
            q: 2.0,
            gain: 0.6,
            voiced: false,
        },
        "ZH" => Fricative {
            center: 3000.0,
            q: 2.0,
            gain: 0.45,
            voiced: true,
        },
        "F" => Fricative {
            center: 4000.0,
            q: 0.7,
            gain: 0.25,
            voiced: false,
        },
        "V" => Fricative {
            center: 4000.0,
            q: 0.7,
            gain: 0.2,
            voiced: true,
        },
        "TH" => Fricative {
            center: 5000.0,
            q: 1.0,
            gain: 0.25,
            voiced: false,
        },
        "DH" => Fricative {
            center: 5000.0,
            q: 1.0,
            gain: 0.2,
            voiced: true,
        },
        "HH" => Fricative {
            center: 1500.0,
            q: 0.8,
            gain: 0.3,
            voiced: false,
        },
        "P" => Stop {
            burst: 800.0,
            voiced: false,
        },
        "B" => Stop {
            burst: 800.0,
            voiced: true,
        },
        "T" => Stop {
            burst: 4500.0,
            voiced: false,
        },
        "D" => Stop {
            burst: 4500.0,
            voiced: true,
        },
        "K" => Stop {
            burst: 2000.0,
            voiced: false,
        },
        "G" => Stop {
            burst: 2000.0,
            voiced: true,
        },
        "CH" => Affricate {
            center: 3000.0,
            voiced: false,
        },
        "JH" => Affricate {
            center: 3000.0,
            voiced: true,
        },
        other => unreachable!("`{other}` is not an inventory symbol"),
    }
}

/// Default duration of a phoneme in milliseconds.
pub fn default_duration_ms(symbol: &str) -> f64 {
    match sound(symbol) {
        Sound::Sonorant { gain, .. } if gain >= 1.0 => {
            if symbol.len() == 2 && matches!(symbol, "AW" | "AY" | "EY" | "OW" | "OY") {
                170.0
            } else {
                130.0
            }
        }
        Sound::Sonorant { .. } => 80.0,
        Sound::Fricative { .. } => 110.0,
        Sound::Stop { .. } => 90.0,
        Sound::Affricate { .. } => 120.0,
    }
}

/// Harmonics of `f0` shaped by a three-formant envelope.
fn harmonic_series(n: usize, rate: f64, f0: f64, formants: [f64; 3], phase0: f64) -> Vec<f64> {
    let max_f = (rate / 2.0 - 500.0).min(5000.0);
    let harmonics: Vec<(f64, f64)> = (1..)
        .map(|k| k as f64 * f0)
        .take_while(|&f| f < max_f)
        .map(|f| {
            let amp: f64 = formants
                .iter()
                .enumerate()
                .map(|(i, &fc)| {
                    let bw = 80.0 + 40.0 * i as f64;
                    (1.0 / (i as f64 + 1.0)) / (1.0 + ((f - fc) / bw).powi(2))
                })
                .sum::<f64>()
                + 0.02;
            (f, amp)
        })
        .collect();
    (0..n)
        .map(|i| {
            let t = i as f64 / rate + phase0;
            harmonics
                .iter()
                .map(|&(f, a)| a * (2.0 * PI * f * t).sin())
                .sum()
        })
        .collect()
}

/// Voiced source: unshaped band-limited pulse train with a gentle spectral tilt.
fn voice_bar(n: usize, rate: f64, f0: f64, phase0: f64) -> Vec<f64> {
    harmonic_series(n, rate, f0, [f0, 2.0 * f0, 3.0 * f0], phase0)
}

fn bandpass_noise(n: usize, rate: f64, center: f64, q: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let center = center.min(rate / 2.0 * 0.9);
    let w0 = 2.0 * PI * center / rate;
    let alpha = w0.sin() / (2.0 * q);
    let (b0, b2) = (alpha, -alpha);
    let (a0, a1, a2) = (1.0 + alpha, -2.0 * w0.cos(), 1.0 - alpha);
    let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
    (0..n)
        .map(|_| {
            let x: f64 = rng.random_range(-1.0..1.0);
            let y = (b0 * x + b2 * x2 - a1 * y1 - a2 * y2) / a0;
            x2 = x1;
            x1 = x;
            y2 = y1;
            y1 = y;
            y
        })
        .collect()
}

fn normalize_peak(x: &mut [f64], peak: f64) {
    let max = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max > 0.0 {
        x.iter_mut().for_each(|v| *v *= peak / max);
    }
}

fn render(symbol: &str, n: usize, rate: f64, f0: f64, t0: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut out = match sound(symbol) {
        Sound::Sonorant { formants, gain } => {
            let mut x = harmonic_series(n, rate, f0, formants, t0);
            normalize_peak(&mut x, gain);
            x
        }
        Sound::Fricative {
            center,
            q,
            gain,
            voiced,
        } => {
            let mut x = bandpass_noise(n, rate, center, q, rng);
            normalize_peak(&mut x, gain);
            if voiced {
                let mut v = voice_bar(n, rate, f0, t0);
                normalize_peak(&mut v, 0.3);
                x.iter_mut().zip(v).for_each(|(a, b)| *a += b);
            }
            x
        }
        Sound::Stop { burst, voiced } => {
            let closure = n * 6 / 10;
            let mut x = vec![0.0; n];
            if voiced {
                let mut v = voice_bar(closure, rate, f0, t0);
                normalize_peak(&mut v, 0.15);
                x[..closure].copy_from_slice(&v);
            }
            let mut b = bandpass_noise(n - closure, rate, burst, 1.0, rng);
            normalize_peak(&mut b, 0.8);
            let len = b.len() as f64;
            for (i, v) in b.iter().enumerate() {
                x[closure + i] += v * (-(i as f64) / (len / 3.0)).exp();
            }
            x
        }
        Sound::Affricate { center, voiced } => {
            let closure = n * 3 / 10;
            let mut x = vec![0.0; n];
            let mut f = bandpass_noise(n - closure, rate, center, 2.0, rng);
            normalize_peak(&mut f, 0.6);
            x[closure..].copy_from_slice(&f);
            if voiced {
                let mut v = voice_bar(n, rate, f0, t0);
                normalize_peak(&mut v, 0.2);
                x.iter_mut().zip(v).for_each(|(a, b)| *a += b);
            }
            x
        }
    };
    // 5 ms raised-cosine edges keep joins click-free.
    let ramp = ((0.005 * rate) as usize).min(n / 2);
    for i in 0..ramp {
        let g = 0.5 - 0.5 * (PI * i as f64 / ramp as f64).cos();
        out[i] *= g;
        out[n - 1 - i] *= g;
    }
    out
}

/// Synthesizes `phonemes`, each given as `(symbol, duration_ms)`.
pub fn synthesize_timed(
    phonemes: &[(&str, f64)],
    classes: &PhonemeClassTable,
    options: &SynthOptions,
) -> Result<Utterance, PhonemeError> {
    let rate = options.sample_rate as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let ms_to_n = |ms: f64| (ms * rate / 1000.0).round() as usize;

    let mut samples = vec![0.0; ms_to_n(options.lead_silence_ms)];
    let mut segments = Vec::with_capacity(phonemes.len());
    for &(symbol, dur_ms) in phonemes {
        let phoneme = classes.phoneme(symbol)?;
        let n = ms_to_n(dur_ms * options.tempo).max(1);
        let start = samples.len();
        let t0 = start as f64 / rate;
        samples.extend(render(symbol, n, rate, options.f0_hz, t0, &mut rng));
        segments.push(PhonemeSegment::new(
            phoneme,
            start as f64 * 1000.0 / rate,
            samples.len() as f64 * 1000.0 / rate,
        ));
    }
    samples.extend(std::iter::repeat_n(0.0, ms_to_n(options.tail_silence_ms)));
    normalize_peak(&mut samples, options.peak);

    let audio = AudioBuffer::from_f64(&samples, options.sample_rate)
        .expect("synthesized samples are finite and normalized");
    Ok(Utterance { audio, segments })
}

/// Synthesizes `symbols` with their default durations.
pub fn synthesize(
    symbols: &[&str],
    classes: &PhonemeClassTable,
    options: &SynthOptions,
) -> Result<Utterance, PhonemeError> {
    for s in symbols {
        classes.phoneme(s)?;
    }
    let timed: Vec<(&str, f64)> = symbols
        .iter()
        .map(|&s| (s, default_duration_ms(s)))
        .collect();
    synthesize_timed(&timed, classes, options)
}

/// Pure sine tone.
pub fn tone(freq: f64, duration_ms: f64, amplitude: f64, rate: u32) -> Vec<f64> {
    let n = (duration_ms * rate as f64 / 1000.0).round() as usize;
    (0..n)
        .map(|i| amplitude * (2.0 * PI * freq * i as f64 / rate as f64).sin())
        .collect()
}

/// Band-limited pulse train at `f0` with a vowel-like formant envelope, peak-normalized.
pub fn pulse_train_vowel(f0: f64, duration_ms: f64, peak: f64, rate: u32) -> Vec<f64> {
    let n = (duration_ms * rate as f64 / 1000.0).round() as usize;
    let mut x = harmonic_series(n, rate as f64, f0, [700.0, 1200.0, 2500.0], 0.0);
    normalize_peak(&mut x, peak);
    x
}

/// Uniform white noise in `[-amplitude, amplitude]`.
pub fn white_noise(duration_ms: f64, amplitude: f64, rate: u32, seed: u64) -> Vec<f64> {
    let n = (duration_ms * rate as f64 / 1000.0).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| rng.random_range(-amplitude..=amplitude))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segments_are_contiguous_and_match_audio() {
        let classes = PhonemeClassTable::default();
        let utt = synthesize(&["HH", "EH", "L", "OW"], &classes, &SynthOptions::default()).unwrap();
        assert_eq!(utt.segments.len(), 4);
        assert_eq!(utt.segments[0].start_ms, 100.0);
        for w in utt.segments.windows(2) {
            assert_eq!(w[0].end_ms, w[1].start_ms);
        }
        let end = utt.segments.last().unwrap().end_ms;
        assert!((utt.audio.duration_ms() - end - 100.0).abs() < 0.1);
    }

    #[test]
    fn deterministic() {
        let classes = PhonemeClassTable::default();
        let a = synthesize(&["S", "IY"], &classes, &SynthOptions::default()).unwrap();
        let b = synthesize(&["S", "IY"], &classes, &SynthOptions::default()).unwrap();
        assert_eq!(a.audio, b.audio);
    }

    #[test]
    fn every_inventory_phoneme_renders() {
        let classes = PhonemeClassTable::default();
        let all: Vec<&str> = crate::phoneme::INVENTORY.iter().map(|(s, _)| *s).collect();
        let utt = synthesize(&all, &classes, &SynthOptions::default()).unwrap();
        assert!(utt.audio.rms() > 0.01);
    }

    #[test]
    fn unknown_symbol_rejected() {
        let classes = PhonemeClassTable::default();
        assert!(synthesize(&["XX"], &classes, &SynthOptions::default()).is_err());
    }
}

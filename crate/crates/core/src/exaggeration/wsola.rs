//! Waveform-similarity overlap-add time-scale modification.

use std::f64::consts::PI;

use super::ExaggerationError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WsolaConfig {
    pub window_ms: f64,
    /// Maximum shift of an analysis frame from its nominal position.
    pub tolerance_ms: f64,
}

impl Default for WsolaConfig {
    fn default() -> Self {
        Self {
            window_ms: 25.0,
            tolerance_ms: 10.0,
        }
    }
}

/// Shortest window the adaptive configuration will shrink to.
pub const MIN_WINDOW_MS: f64 = 5.0;

impl WsolaConfig {
    /// The default configuration, with the window shrunk so that a signal of
    /// `len_ms` still spans two windows.
    pub fn for_length(len_ms: f64) -> Self {
        let default = Self::default();
        if len_ms >= 2.0 * default.window_ms {
            return default;
        }
        let window_ms = (len_ms / 2.0).max(MIN_WINDOW_MS);
        Self {
            window_ms,
            tolerance_ms: default.tolerance_ms.min(window_ms),
        }
    }
}

/// Stretches `input` so its length becomes `round(len * ratio)` samples
/// without changing its pitch.
pub(crate) fn wsola(
    input: &[f64],
    ratio: f64,
    rate: u32,
    config: &WsolaConfig,
) -> Result<Vec<f64>, ExaggerationError> {
    let mut win = (config.window_ms * rate as f64 / 1000.0).round() as usize;
    win += win % 2;
    if input.len() < 2 * win || win < 4 {
        return Err(ExaggerationError::TooShort {
            needed_ms: 2.0 * config.window_ms,
            got_ms: input.len() as f64 * 1000.0 / rate as f64,
        });
    }
    let out_len = (input.len() as f64 * ratio).round() as usize;
    let hop = win / 2;
    let tolerance = (config.tolerance_ms * rate as f64 / 1000.0).round() as isize;
    let last_start = (input.len() - win) as isize;
    // Periodic Hann sums to one at 50% overlap.
    let window: Vec<f64> = (0..win)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / win as f64).cos())
        .collect();

    let n_frames = out_len.div_ceil(hop) + 1;
    let mut out = vec![0.0; n_frames * hop + win];
    let mut norm = vec![0.0; out.len()];
    let mut prev: Option<isize> = None;

    for k in 0..n_frames {
        let nominal = ((k * hop) as f64 / ratio).round() as isize;
        let pos = match prev {
            None => nominal.clamp(0, last_start),
            Some(p) => best_shift(input, nominal, p + hop as isize, tolerance, hop, last_start),
        };
        let start = k * hop;
        for i in 0..win {
            out[start + i] += input[pos as usize + i] * window[i];
            norm[start + i] += window[i];
        }
        prev = Some(pos);
    }

    out.truncate(out_len);
    for (o, n) in out.iter_mut().zip(&norm) {
        if *n > 1e-3 {
            *o /= n;
        }
    }
    Ok(out)
}

/// Position within `nominal ± tolerance` whose leading `overlap` samples best
/// match the natural continuation of the previously copied frame.
fn best_shift(
    input: &[f64],
    nominal: isize,
    continuation: isize,
    tolerance: isize,
    overlap: usize,
    last_start: isize,
) -> isize {
    // Near the edges the search window slides inward instead of shrinking.
    let center = if last_start >= 2 * tolerance {
        nominal.clamp(tolerance, last_start - tolerance)
    } else {
        nominal
    };
    let lo = (center - tolerance).clamp(0, last_start);
    let hi = (center + tolerance).clamp(0, last_start);
    let reference = &input[continuation as usize..continuation as usize + overlap];
    let ref_energy: f64 = reference.iter().map(|v| v * v).sum();
    let mut best = (f64::NEG_INFINITY, nominal.clamp(0, last_start));
    for pos in lo..=hi {
        let cand = &input[pos as usize..pos as usize + overlap];
        let (mut num, mut energy) = (0.0, 0.0);
        for (a, b) in cand.iter().zip(reference) {
            num += a * b;
            energy += a * a;
        }
        let den = (energy * ref_energy).sqrt();
        let score = if den > 1e-12 { num / den } else { 0.0 };
        // Strict comparison keeps the earliest position on ties.
        if score > best.0 {
            best = (score, pos);
        }
    }
    best.1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    #[test]
    fn output_length_is_exact() {
        let x = synth::pulse_train_vowel(120.0, 200.0, 0.5, 16_000);
        for ratio in [0.5, 0.8, 1.26, 1.5, 2.0, 3.0] {
            let y = wsola(&x, ratio, 16_000, &WsolaConfig::default()).unwrap();
            assert_eq!(y.len(), (x.len() as f64 * ratio).round() as usize);
        }
    }

    #[test]
    fn stationary_tone_keeps_amplitude() {
        let x = synth::tone(200.0, 300.0, 0.5, 16_000);
        let y = wsola(&x, 1.5, 16_000, &WsolaConfig::default()).unwrap();
        let mid = &y[1000..y.len() - 1000];
        let rms = crate::audio::rms(mid);
        assert!((rms - 0.5 / 2f64.sqrt()).abs() < 0.02, "{rms}");
    }

    #[test]
    fn adaptive_window_for_short_input() {
        let cfg = WsolaConfig::for_length(30.0);
        assert_eq!(cfg.window_ms, 15.0);
        let x = synth::tone(200.0, 30.0, 0.5, 16_000);
        assert!(wsola(&x, 1.5, 16_000, &cfg).is_ok());
        assert!(wsola(&x, 1.5, 16_000, &WsolaConfig::default()).is_err());
    }
}

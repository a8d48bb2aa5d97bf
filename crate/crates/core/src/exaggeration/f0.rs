//! Autocorrelation pitch tracking.

use serde::{Deserialize, Serialize};

use super::ExaggerationError;
use crate::audio::AudioBuffer;

pub const F0_MIN_HZ: f64 = 50.0;
pub const F0_MAX_HZ: f64 = 500.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F0Config {
    pub window_ms: f64,
    pub hop_ms: f64,
    /// Minimum normalized autocorrelation peak for a voiced decision.
    pub voicing_threshold: f64,
    /// Frames quieter than this RMS are unvoiced regardless of periodicity.
    pub silence_rms: f64,
}

impl Default for F0Config {
    fn default() -> Self {
        Self {
            window_ms: 40.0,
            hop_ms: 10.0,
            voicing_threshold: 0.3,
            silence_rms: 1e-4,
        }
    }
}

/// Per-frame f0 in Hz; `0.0` marks an unvoiced frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F0Track {
    pub frames: Vec<f64>,
    pub hop_ms: f64,
}

impl F0Track {
    pub fn voiced(&self) -> impl Iterator<Item = f64> + '_ {
        self.frames.iter().copied().filter(|&f| f > 0.0)
    }

    pub fn voiced_count(&self) -> usize {
        self.voiced().count()
    }

    /// Mean f0 over voiced frames.
    pub fn mean_voiced(&self) -> Option<f64> {
        let n = self.voiced_count();
        (n > 0).then(|| self.voiced().sum::<f64>() / n as f64)
    }
}

pub fn estimate_f0(segment: &AudioBuffer) -> Result<F0Track, ExaggerationError> {
    estimate_f0_with(segment, &F0Config::default())
}

pub fn estimate_f0_with(
    segment: &AudioBuffer,
    config: &F0Config,
) -> Result<F0Track, ExaggerationError> {
    let rate = segment.sample_rate() as f64;
    let win = (config.window_ms * rate / 1000.0).round() as usize;
    let hop = (config.hop_ms * rate / 1000.0).round() as usize;
    if segment.len() < win {
        return Err(ExaggerationError::TooShort {
            needed_ms: config.window_ms,
            got_ms: segment.duration_ms(),
        });
    }
    let x = segment.to_f64();
    let min_lag = (rate / F0_MAX_HZ).floor() as usize;
    let max_lag = ((rate / F0_MIN_HZ).ceil() as usize).min(win - 2);
    let n_frames = (x.len() - win) / hop + 1;

    let frames = (0..n_frames)
        .map(|f| {
            let frame = &x[f * hop..f * hop + win];
            let mean = frame.iter().sum::<f64>() / win as f64;
            let frame: Vec<f64> = frame.iter().map(|v| v - mean).collect();
            let energy = frame.iter().map(|v| v * v).sum::<f64>();
            if (energy / win as f64).sqrt() < config.silence_rms {
                return 0.0;
            }
            frame_f0(&frame, rate, min_lag, max_lag, config.voicing_threshold)
        })
        .collect();
    Ok(F0Track {
        frames,
        hop_ms: config.hop_ms,
    })
}

fn frame_f0(frame: &[f64], rate: f64, min_lag: usize, max_lag: usize, threshold: f64) -> f64 {
    let n = frame.len();
    // Normalized cross-correlation between the frame head and its lagged tail.
    let nccf: Vec<f64> = (0..=max_lag + 1)
        .map(|lag| {
            if lag < min_lag.saturating_sub(1) {
                return 0.0;
            }
            let a = &frame[..n - lag];
            let b = &frame[lag..];
            let num: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            let ea: f64 = a.iter().map(|x| x * x).sum();
            let eb: f64 = b.iter().map(|x| x * x).sum();
            let den = (ea * eb).sqrt();
            if den > 0.0 {
                num / den
            } else {
                0.0
            }
        })
        .collect();

    let peaks: Vec<usize> = (min_lag..=max_lag)
        .filter(|&l| nccf[l] >= nccf[l - 1] && nccf[l] >= nccf[l + 1] && nccf[l] > 0.0)
        .collect();
    let Some(best) = peaks.iter().map(|&l| nccf[l]).reduce(f64::max) else {
        return 0.0;
    };
    if best < threshold {
        return 0.0;
    }
    // The shortest lag close to the best peak avoids octave-down errors.
    let lag = *peaks
        .iter()
        .find(|&&l| nccf[l] >= 0.9 * best)
        .expect("best peak is itself a candidate");

    let (y0, y1, y2) = (nccf[lag - 1], nccf[lag], nccf[lag + 1]);
    let denom = y0 - 2.0 * y1 + y2;
    let offset = if denom.abs() > 1e-12 {
        (0.5 * (y0 - y2) / denom).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    let f0 = rate / (lag as f64 + offset);
    if (F0_MIN_HZ..=F0_MAX_HZ).contains(&f0) {
        f0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    fn buf(x: &[f64]) -> AudioBuffer {
        AudioBuffer::from_f64(x, 16_000).unwrap()
    }

    #[test]
    fn sine_220() {
        let track = estimate_f0(&buf(&synth::tone(220.0, 300.0, 0.5, 16_000))).unwrap();
        assert!(track.voiced_count() == track.frames.len());
        for f in track.voiced() {
            assert!((f - 220.0).abs() <= 2.0, "{f}");
        }
    }

    #[test]
    fn pulse_train_120() {
        let track =
            estimate_f0(&buf(&synth::pulse_train_vowel(120.0, 200.0, 0.5, 16_000))).unwrap();
        let mean = track.mean_voiced().unwrap();
        assert!((mean - 120.0).abs() < 1.0, "{mean}");
    }

    #[test]
    fn noise_and_silence_unvoiced() {
        let noise = estimate_f0(&buf(&synth::white_noise(500.0, 0.5, 16_000, 3))).unwrap();
        assert_eq!(noise.voiced_count(), 0);
        let silence = estimate_f0(&buf(&vec![0.0; 8000])).unwrap();
        assert_eq!(silence.voiced_count(), 0);
        assert!(silence.frames.iter().all(|&f| f == 0.0));
    }

    #[test]
    fn values_in_range_or_zero() {
        for freq in [40.0, 60.0, 300.0, 490.0, 700.0] {
            let track = estimate_f0(&buf(&synth::tone(freq, 200.0, 0.5, 16_000))).unwrap();
            assert!(track
                .frames
                .iter()
                .all(|&f| f == 0.0 || (F0_MIN_HZ..=F0_MAX_HZ).contains(&f)));
        }
    }

    #[test]
    fn too_short() {
        assert!(matches!(
            estimate_f0(&buf(&vec![0.1; 100])),
            Err(ExaggerationError::TooShort { .. })
        ));
    }
}

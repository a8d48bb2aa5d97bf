//! Log-compressed mel-band energies on a fixed frame grid.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::AlignmentError;
use crate::audio::AudioBuffer;

const LOG_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub window_ms: f64,
    pub hop_ms: f64,
    pub mel_bands: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            window_ms: 25.0,
            hop_ms: 10.0,
            mel_bands: 40,
        }
    }
}

impl FeatureConfig {
    pub fn window_samples(&self, rate: u32) -> usize {
        (self.window_ms * rate as f64 / 1000.0).round() as usize
    }

    pub fn hop_samples(&self, rate: u32) -> usize {
        (self.hop_ms * rate as f64 / 1000.0).round() as usize
    }

    /// `floor((n - window) / hop) + 1`, or zero when `n < window`.
    pub fn frame_count(&self, n_samples: usize, rate: u32) -> usize {
        let w = self.window_samples(rate);
        if n_samples < w {
            0
        } else {
            (n_samples - w) / self.hop_samples(rate) + 1
        }
    }
}

/// Frames × coefficients, plus the grid the frames were taken on.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub frames: Vec<Vec<f64>>,
    pub hop_ms: f64,
    pub window_ms: f64,
}

impl FeatureMatrix {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Time of the centre of frame `i`.
    pub fn frame_center_ms(&self, i: f64) -> f64 {
        i * self.hop_ms + self.window_ms / 2.0
    }

    /// Fractional frame index whose centre falls at `ms`.
    pub fn frame_at_ms(&self, ms: f64) -> f64 {
        (ms - self.window_ms / 2.0) / self.hop_ms
    }

    /// Frames whose centres lie in `[start_ms, end_ms)`; at least the nearest frame.
    pub fn frames_between(&self, start_ms: f64, end_ms: f64) -> &[Vec<f64>] {
        let n = self.frames.len();
        if n == 0 {
            return &self.frames;
        }
        let first = self.frame_at_ms(start_ms).ceil().max(0.0) as usize;
        let last = self.frame_at_ms(end_ms).ceil().max(0.0) as usize;
        let first = first.min(n - 1);
        let last = last.min(n).max(first + 1);
        &self.frames[first..last]
    }
}

pub struct FeatureExtractor {
    config: FeatureConfig,
    sample_rate: u32,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    fft_len: usize,
    filters: Vec<(usize, Vec<f64>)>,
}

impl FeatureExtractor {
    pub fn new(config: FeatureConfig, sample_rate: u32) -> Self {
        let win_len = config.window_samples(sample_rate);
        let fft_len = win_len.next_power_of_two();
        let window = (0..win_len)
            .map(|i| {
                0.54 - 0.46 * (2.0 * std::f64::consts::PI * i as f64 / (win_len - 1) as f64).cos()
            })
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(fft_len);
        let filters = mel_filterbank(config.mel_bands, fft_len, sample_rate);
        Self {
            config,
            sample_rate,
            window,
            fft,
            fft_len,
            filters,
        }
    }

    pub fn extract(&self, audio: &AudioBuffer) -> Result<FeatureMatrix, AlignmentError> {
        debug_assert_eq!(audio.sample_rate(), self.sample_rate);
        let n_frames = self.config.frame_count(audio.len(), self.sample_rate);
        if n_frames == 0 {
            return Err(AlignmentError::TooShort {
                needed_ms: self.config.window_ms,
                got_ms: audio.duration_ms(),
            });
        }
        let hop = self.config.hop_samples(self.sample_rate);
        let samples = audio.samples();
        let mut buf = vec![Complex::new(0.0, 0.0); self.fft_len];
        let mut frames = Vec::with_capacity(n_frames);
        for f in 0..n_frames {
            let start = f * hop;
            buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
            for (i, w) in self.window.iter().enumerate() {
                buf[i].re = samples[start + i] as f64 * w;
            }
            self.fft.process(&mut buf);
            let power: Vec<f64> = buf[..self.fft_len / 2 + 1]
                .iter()
                .map(|c| c.norm_sqr())
                .collect();
            let frame = self
                .filters
                .iter()
                .map(|(offset, weights)| {
                    let e: f64 = weights
                        .iter()
                        .zip(&power[*offset..])
                        .map(|(w, p)| w * p)
                        .sum();
                    e.max(LOG_FLOOR).ln()
                })
                .collect();
            frames.push(frame);
        }
        Ok(FeatureMatrix {
            frames,
            hop_ms: self.config.hop_ms,
            window_ms: self.config.window_ms,
        })
    }
}

pub fn extract_features(
    audio: &AudioBuffer,
    config: &FeatureConfig,
) -> Result<FeatureMatrix, AlignmentError> {
    FeatureExtractor::new(*config, audio.sample_rate()).extract(audio)
}

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters as `(first_bin, weights)`, spanning 0 Hz to Nyquist.
fn mel_filterbank(bands: usize, fft_len: usize, rate: u32) -> Vec<(usize, Vec<f64>)> {
    let nyquist = rate as f64 / 2.0;
    let max_mel = hz_to_mel(nyquist);
    let edges: Vec<f64> = (0..bands + 2)
        .map(|i| mel_to_hz(max_mel * i as f64 / (bands + 1) as f64))
        .collect();
    let bin_hz = rate as f64 / fft_len as f64;
    let n_bins = fft_len / 2 + 1;
    (0..bands)
        .map(|b| {
            let (lo, mid, hi) = (edges[b], edges[b + 1], edges[b + 2]);
            let first = (lo / bin_hz).floor() as usize;
            let last = ((hi / bin_hz).ceil() as usize).min(n_bins - 1);
            let weights = (first..=last)
                .map(|k| {
                    let f = k as f64 * bin_hz;
                    if f <= lo || f >= hi {
                        0.0
                    } else if f <= mid {
                        (f - lo) / (mid - lo)
                    } else {
                        (hi - f) / (hi - mid)
                    }
                })
                .collect();
            (first, weights)
        })
        .collect()
}

//! Mono PCM audio buffers, WAV I/O, and band-limited resampling.

use std::io::{Cursor, Read, Seek, Write};
use std::path::Path;

use thiserror::Error;

/// Sample rates accepted at ingestion.
pub const SUPPORTED_RATES: [u32; 4] = [16_000, 22_050, 44_100, 48_000];

/// Rate everything is converted to on ingestion.
pub const DEFAULT_RATE: u32 = 16_000;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("unsupported sample rate {0} Hz")]
    UnsupportedRate(u32),
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("sample {value} at index {index} outside [-1, 1]")]
    OutOfRange { index: usize, value: f32 },
    #[error("expected mono audio, got {0} channels")]
    NotMono(u16),
    #[error("unsupported sample format: {0}")]
    UnsupportedFormat(String),
    #[error("wav: {0}")]
    Wav(#[from] hound::Error),
}

/// Mono audio with samples in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f32>,
    sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self, AudioError> {
        if !SUPPORTED_RATES.contains(&sample_rate) {
            return Err(AudioError::UnsupportedRate(sample_rate));
        }
        for (index, &value) in samples.iter().enumerate() {
            if !value.is_finite() {
                return Err(AudioError::NonFinite(index));
            }
            if value.abs() > 1.0 {
                return Err(AudioError::OutOfRange { index, value });
            }
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    /// Builds a buffer from f64 samples, clamping to `[-1, 1]`.
    pub fn from_f64(samples: &[f64], sample_rate: u32) -> Result<Self, AudioError> {
        let converted = samples
            .iter()
            .map(|&s| {
                if s.is_finite() {
                    s.clamp(-1.0, 1.0) as f32
                } else {
                    f32::NAN
                }
            })
            .collect();
        Self::new(converted, sample_rate)
    }

    /// Crate-internal constructor for samples already known to be valid.
    pub(crate) fn from_valid(samples: Vec<f32>, sample_rate: u32) -> Self {
        debug_assert!(samples.iter().all(|s| s.is_finite() && s.abs() <= 1.0));
        Self {
            samples,
            sample_rate,
        }
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f32> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_ms(&self) -> f64 {
        self.samples.len() as f64 * 1000.0 / self.sample_rate as f64
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.samples.iter().map(|&s| s as f64).collect()
    }

    /// Sample index closest to `ms`, clamped to `[0, len]`.
    pub fn ms_to_index(&self, ms: f64) -> usize {
        let idx = (ms * self.sample_rate as f64 / 1000.0).round();
        (idx.max(0.0) as usize).min(self.samples.len())
    }

    pub fn index_to_ms(&self, index: usize) -> f64 {
        index as f64 * 1000.0 / self.sample_rate as f64
    }

    /// Copies `[start_ms, end_ms)` into a new buffer.
    pub fn slice_ms(&self, start_ms: f64, end_ms: f64) -> AudioBuffer {
        let a = self.ms_to_index(start_ms);
        let b = self.ms_to_index(end_ms).max(a);
        Self::from_valid(self.samples[a..b].to_vec(), self.sample_rate)
    }

    pub fn rms(&self) -> f64 {
        rms(&self.to_f64())
    }

    /// Resamples to `target_rate`; identity when the rates already match.
    pub fn resample(&self, target_rate: u32) -> Result<AudioBuffer, AudioError> {
        if !SUPPORTED_RATES.contains(&target_rate) {
            return Err(AudioError::UnsupportedRate(target_rate));
        }
        if target_rate == self.sample_rate {
            return Ok(self.clone());
        }
        let factor = self.sample_rate as f64 / target_rate as f64;
        let out_len = (self.samples.len() as f64 / factor).round() as usize;
        let out = resample_by(&self.to_f64(), factor, out_len);
        AudioBuffer::from_f64(&out, target_rate)
    }

    /// Decodes a WAV stream, converting supported non-default rates to 16 kHz.
    pub fn read_wav<R: Read>(reader: R) -> Result<AudioBuffer, AudioError> {
        let mut reader = hound::WavReader::new(reader)?;
        let spec = reader.spec();
        if spec.channels != 1 {
            return Err(AudioError::NotMono(spec.channels));
        }
        let samples: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
            (hound::SampleFormat::Int, 16) => reader
                .samples::<i16>()
                .map(|s| s.map(|v| v as f32 / 32768.0))
                .collect::<Result<_, _>>()?,
            (hound::SampleFormat::Float, 32) => reader
                .samples::<f32>()
                .map(|s| s.map(|v| v.clamp(-1.0, 1.0)))
                .collect::<Result<_, _>>()?,
            (format, bits) => {
                return Err(AudioError::UnsupportedFormat(format!(
                    "{format:?} {bits}-bit"
                )))
            }
        };
        let buffer = AudioBuffer::new(samples, spec.sample_rate)?;
        if buffer.sample_rate != DEFAULT_RATE {
            log::info!(
                "resampling input from {} Hz to {} Hz",
                buffer.sample_rate,
                DEFAULT_RATE
            );
            return buffer.resample(DEFAULT_RATE);
        }
        Ok(buffer)
    }

    pub fn from_wav_bytes(bytes: &[u8]) -> Result<AudioBuffer, AudioError> {
        Self::read_wav(Cursor::new(bytes))
    }

    pub fn open_wav(path: impl AsRef<Path>) -> Result<AudioBuffer, AudioError> {
        let file = std::fs::File::open(path).map_err(hound::Error::IoError)?;
        Self::read_wav(std::io::BufReader::new(file))
    }

    /// Encodes as 16-bit integer PCM.
    pub fn write_wav<W: Write + Seek>(&self, writer: W) -> Result<(), AudioError> {
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: self.sample_rate,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::new(writer, spec)?;
        for &s in &self.samples {
            w.write_sample(quantize_i16(s))?;
        }
        w.finalize()?;
        Ok(())
    }

    pub fn to_wav_bytes(&self) -> Vec<u8> {
        let mut cursor = Cursor::new(Vec::new());
        self.write_wav(&mut cursor)
            .expect("writing wav to memory cannot fail");
        cursor.into_inner()
    }

    pub fn save_wav(&self, path: impl AsRef<Path>) -> Result<(), AudioError> {
        let file = std::fs::File::create(path).map_err(hound::Error::IoError)?;
        self.write_wav(std::io::BufWriter::new(file))
    }

    /// The buffer as it would read back from a 16-bit WAV file.
    pub fn quantized(&self) -> AudioBuffer {
        let samples = self
            .samples
            .iter()
            .map(|&s| quantize_i16(s) as f32 / 32768.0)
            .collect();
        Self::from_valid(samples, self.sample_rate)
    }
}

fn quantize_i16(s: f32) -> i16 {
    (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

pub fn rms(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    (samples.iter().map(|s| s * s).sum::<f64>() / samples.len() as f64).sqrt()
}

const SINC_ZEROS: f64 = 16.0;

/// Windowed-sinc interpolation reading `input` at positions `k * step`.
///
/// `step > 1` compresses (reads faster), so the kernel cutoff is lowered to
/// `1 / step` to avoid aliasing.
pub(crate) fn resample_by(input: &[f64], step: f64, out_len: usize) -> Vec<f64> {
    let cutoff = (1.0 / step).min(1.0);
    let half_width = SINC_ZEROS / cutoff;
    let n = input.len() as isize;
    (0..out_len)
        .map(|k| {
            let pos = k as f64 * step;
            let lo = (pos - half_width).ceil() as isize;
            let hi = (pos + half_width).floor() as isize;
            let mut acc = 0.0;
            for j in lo.max(0)..=hi.min(n - 1) {
                let x = pos - j as f64;
                let w = 0.5 + 0.5 * (std::f64::consts::PI * x / half_width).cos();
                acc += input[j as usize] * cutoff * sinc(cutoff * x) * w;
            }
            acc
        })
        .collect()
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

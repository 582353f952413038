//! Fixed-length framing of scaled streams and mean-amplitude silence rejection.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio_io::AudioStream;

#[derive(Debug, Error, PartialEq)]
pub enum FramingError {
    #[error("stream must be scaled before framing")]
    NotScaled,
    #[error("stream of {samples} samples is shorter than one frame ({frame_len} samples)")]
    StreamTooShort { samples: usize, frame_len: usize },
    #[error("invalid framing config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FramingConfig {
    /// Frame duration in seconds.
    pub frame_seconds: f64,
    /// Frames whose mean absolute amplitude falls below this are dropped.
    pub silence_threshold: f64,
}

impl Default for FramingConfig {
    fn default() -> Self {
        Self { frame_seconds: 0.3, silence_threshold: 0.05 }
    }
}

impl FramingConfig {
    pub fn validate(&self) -> Result<(), FramingError> {
        if !(self.frame_seconds > 0.0 && self.frame_seconds.is_finite()) {
            return Err(FramingError::InvalidConfig(format!(
                "frame_seconds must be positive, got {}",
                self.frame_seconds
            )));
        }
        if !(0.0..1.0).contains(&self.silence_threshold) {
            return Err(FramingError::InvalidConfig(format!(
                "silence_threshold must lie in [0, 1), got {}",
                self.silence_threshold
            )));
        }
        Ok(())
    }

    pub fn frame_len(&self, sample_rate: u32) -> usize {
        (self.frame_seconds * sample_rate as f64).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    samples: Vec<f64>,
    sample_rate: u32,
    index: usize,
    start_time: f64,
}

impl Frame {
    /// Builds a standalone frame (index 0, starting at t = 0).
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Self {
        Self { samples, sample_rate, index: 0, start_time: 0.0 }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn start_time(&self) -> f64 {
        self.start_time
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Splits a scaled stream into contiguous, non-overlapping frames. A trailing
/// remainder shorter than a frame is dropped.
pub fn partition(stream: &AudioStream, cfg: &FramingConfig) -> Result<Vec<Frame>, FramingError> {
    cfg.validate()?;
    if !stream.is_scaled() {
        return Err(FramingError::NotScaled);
    }
    let frame_len = cfg.frame_len(stream.sample_rate());
    if frame_len == 0 || stream.len() < frame_len {
        return Err(FramingError::StreamTooShort { samples: stream.len(), frame_len });
    }
    Ok(stream
        .samples()
        .chunks_exact(frame_len)
        .enumerate()
        .map(|(index, chunk)| Frame {
            samples: chunk.to_vec(),
            sample_rate: stream.sample_rate(),
            index,
            start_time: index as f64 * cfg.frame_seconds,
        })
        .collect())
}

/// Mean absolute amplitude of a frame.
///
/// The absolute value matters: zero-centred speech has a signed mean near
/// zero regardless of loudness.
pub fn frame_energy(frame: &Frame) -> f64 {
    if frame.samples.is_empty() {
        return 0.0;
    }
    frame.samples.iter().map(|s| s.abs()).sum::<f64>() / frame.samples.len() as f64
}

/// Keeps frames whose energy is at least the silence threshold, in order.
pub fn filter_silence(frames: Vec<Frame>, cfg: &FramingConfig) -> Vec<Frame> {
    frames
        .into_iter()
        .filter(|f| frame_energy(f) >= cfg.silence_threshold)
        .collect()
}

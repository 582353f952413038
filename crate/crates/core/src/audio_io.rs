//! WAV loading and peak scaling of mono PCM streams.

use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("unsupported WAV format: {0}")]
    UnsupportedFormat(String),
    #[error("audio contains no samples")]
    EmptyAudio,
    #[error("stream is pure silence (peak amplitude is zero)")]
    SilentStream,
    #[error("stream is already scaled")]
    AlreadyScaled,
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// Mono PCM samples plus their sample rate.
///
/// `scaled` records whether the samples have been peak-normalized with
/// [`scale_stream`]; downstream framing only accepts scaled streams.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioStream {
    samples: Vec<f64>,
    sample_rate: u32,
    scaled: bool,
}

impl AudioStream {
    /// Wraps raw (unscaled) samples.
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self, AudioError> {
        if samples.is_empty() {
            return Err(AudioError::EmptyAudio);
        }
        if sample_rate == 0 {
            return Err(AudioError::UnsupportedFormat("sample rate is zero".into()));
        }
        Ok(Self { samples, sample_rate, scaled: false })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn is_scaled(&self) -> bool {
        self.scaled
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Reads a PCM WAV file (8/16/24/32-bit integer or 32-bit float), averaging
/// all channels down to mono. Integer samples map to `[-1, 1)`.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioStream, AudioError> {
    let reader = hound::WavReader::open(path.as_ref()).map_err(map_hound)?;
    decode(reader)
}

/// Same as [`read_wav`] but from any byte source.
pub fn read_wav_from<R: std::io::Read>(source: R) -> Result<AudioStream, AudioError> {
    let reader = hound::WavReader::new(source).map_err(map_hound)?;
    decode(reader)
}

fn decode<R: std::io::Read>(reader: hound::WavReader<R>) -> Result<AudioStream, AudioError> {
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(AudioError::UnsupportedFormat("zero channels".into()));
    }

    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()
            .map_err(map_hound)?,
        (hound::SampleFormat::Int, bits @ (8 | 16 | 24 | 32)) => {
            let full_scale = (1u64 << (bits - 1)) as f64;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f64 / full_scale))
                .collect::<Result<_, _>>()
                .map_err(map_hound)?
        }
        (format, bits) => {
            return Err(AudioError::UnsupportedFormat(format!("{format:?} at {bits} bits")))
        }
    };

    let samples: Vec<f64> = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks_exact(channels)
            .map(|tick| tick.iter().sum::<f64>() / channels as f64)
            .collect()
    };

    AudioStream::new(samples, spec.sample_rate)
}

fn map_hound(err: hound::Error) -> AudioError {
    match err {
        hound::Error::IoError(e) => AudioError::Io(e),
        other => AudioError::UnsupportedFormat(other.to_string()),
    }
}

/// Writes mono samples as 32-bit float PCM. Float storage keeps every
/// `f32`-representable sample bit-exact on a later [`read_wav`].
pub fn write_wav_f32(
    path: impl AsRef<Path>,
    samples: &[f64],
    sample_rate: u32,
) -> Result<(), AudioError> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut writer = hound::WavWriter::create(path.as_ref(), spec).map_err(map_hound)?;
    for &s in samples {
        writer.write_sample(s as f32).map_err(map_hound)?;
    }
    writer.finalize().map_err(map_hound)
}

/// Divides every sample by the peak absolute amplitude, so the result peaks
/// at exactly 1.0.
pub fn scale_stream(stream: &AudioStream) -> Result<AudioStream, AudioError> {
    if stream.scaled {
        return Err(AudioError::AlreadyScaled);
    }
    let peak = stream.samples.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    if peak == 0.0 {
        return Err(AudioError::SilentStream);
    }
    let samples = stream.samples.iter().map(|s| s / peak).collect();
    Ok(AudioStream { samples, sample_rate: stream.sample_rate, scaled: true })
}

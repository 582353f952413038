//! Magnitude spectrogram, MFCC spectrogram and their time/frequency weighted
//! sums: the two scalar features computed for every frame.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::framing::Frame;

/// Identifies how [`FeaturePair`]s are computed. Stored in every serialized
/// model so features from a different convention are never mixed in.
pub const FEATURE_CONVENTION: &str =
    "ws-v1;f=(i+1)/n;t=(j+1)*hop/sr;stft=|rfft|;mfcc=|dct2o(ln(max(melhtk(|rfft|^2),1e-10)))|";

/// Floor applied to mel energies before the logarithm.
pub const LOG_FLOOR: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum DspError {
    #[error("frame of {len} samples is shorter than fft_size {fft_size}")]
    FrameTooShort { len: usize, fft_size: usize },
    #[error("invalid DSP config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Hann,
    Hamming,
    Rectangular,
}

impl Window {
    /// Periodic (DFT-even) window of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| {
                let phase = 2.0 * PI * i as f64 / n as f64;
                match self {
                    Window::Hann => 0.5 - 0.5 * phase.cos(),
                    Window::Hamming => 0.54 - 0.46 * phase.cos(),
                    Window::Rectangular => 1.0,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DspConfig {
    pub fft_size: usize,
    pub hop_size: usize,
    pub mel_filters: usize,
    pub mfcc_coeffs: usize,
    pub window: Window,
}

impl Default for DspConfig {
    fn default() -> Self {
        Self { fft_size: 512, hop_size: 128, mel_filters: 40, mfcc_coeffs: 13, window: Window::Hann }
    }
}

impl DspConfig {
    pub fn validate(&self) -> Result<(), DspError> {
        if self.hop_size == 0 || self.fft_size < self.hop_size {
            return Err(DspError::InvalidConfig(format!(
                "need fft_size >= hop_size > 0, got fft_size={} hop_size={}",
                self.fft_size, self.hop_size
            )));
        }
        if self.fft_size < 2 {
            return Err(DspError::InvalidConfig("fft_size must be at least 2".into()));
        }
        if self.mel_filters == 0 || self.mfcc_coeffs == 0 || self.mfcc_coeffs > self.mel_filters {
            return Err(DspError::InvalidConfig(format!(
                "need 0 < mfcc_coeffs <= mel_filters, got {} and {}",
                self.mfcc_coeffs, self.mel_filters
            )));
        }
        Ok(())
    }
}

/// Non-negative intensity matrix with per-row and per-column weights.
/// `intensity[i][j]` is row (frequency axis) `i`, column (time) `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub intensity: Vec<Vec<f64>>,
    pub freq_axis: Vec<f64>,
    pub time_axis: Vec<f64>,
}

impl Spectrogram {
    pub fn rows(&self) -> usize {
        self.freq_axis.len()
    }

    pub fn cols(&self) -> usize {
        self.time_axis.len()
    }
}

/// The two per-frame scalar features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeaturePair {
    pub mfcc_weighted_sum: f64,
    pub spec_weighted_sum: f64,
}

impl FeaturePair {
    pub fn to_vec(self) -> Vec<f64> {
        vec![self.mfcc_weighted_sum, self.spec_weighted_sum]
    }
}

/// Σ_i Σ_j f(i) · t(j) · spec(i, j).
pub fn weighted_sum(spec: &Spectrogram) -> f64 {
    spec.intensity
        .iter()
        .zip(&spec.freq_axis)
        .map(|(row, f)| f * row.iter().zip(&spec.time_axis).map(|(v, t)| t * v).sum::<f64>())
        .sum()
}

fn column_count(len: usize, cfg: &DspConfig) -> Result<usize, DspError> {
    cfg.validate()?;
    if len < cfg.fft_size {
        return Err(DspError::FrameTooShort { len, fft_size: cfg.fft_size });
    }
    Ok(1 + (len - cfg.fft_size) / cfg.hop_size)
}

fn time_axis(cols: usize, cfg: &DspConfig, sample_rate: u32) -> Vec<f64> {
    (0..cols).map(|j| (j + 1) as f64 * cfg.hop_size as f64 / sample_rate as f64).collect()
}

fn normalized_axis(n: usize) -> Vec<f64> {
    (0..n).map(|i| (i + 1) as f64 / n as f64).collect()
}

/// One-sided complex spectra, one vector of `fft_size/2 + 1` bins per column.
fn rfft_columns(frame: &Frame, cfg: &DspConfig) -> Result<Vec<Vec<Complex<f64>>>, DspError> {
    let cols = column_count(frame.len(), cfg)?;
    let n = cfg.fft_size;
    let window = cfg.window.coefficients(n);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    let mut out = Vec::with_capacity(cols);
    for j in 0..cols {
        let start = j * cfg.hop_size;
        for (k, slot) in buf.iter_mut().enumerate() {
            *slot = Complex::new(frame.samples()[start + k] * window[k], 0.0);
        }
        fft.process(&mut buf);
        out.push(buf[..n / 2 + 1].to_vec());
    }
    Ok(out)
}

/// Short-time Fourier transform magnitudes (no padding, unnormalized DFT).
pub fn stft_magnitude(frame: &Frame, cfg: &DspConfig) -> Result<Spectrogram, DspError> {
    let columns = rfft_columns(frame, cfg)?;
    let bins = cfg.fft_size / 2 + 1;
    let intensity = (0..bins)
        .map(|i| columns.iter().map(|col| col[i].norm()).collect())
        .collect();
    Ok(Spectrogram {
        intensity,
        freq_axis: normalized_axis(bins),
        time_axis: time_axis(columns.len(), cfg, frame.sample_rate()),
    })
}

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular HTK-mel filters spanning 0 Hz to Nyquist, peak height 1.
/// Returns `mel_filters` rows of `fft_size/2 + 1` weights.
pub fn mel_filterbank(cfg: &DspConfig, sample_rate: u32) -> Vec<Vec<f64>> {
    let bins = cfg.fft_size / 2 + 1;
    let nyquist = sample_rate as f64 / 2.0;
    let top = hz_to_mel(nyquist);
    let edges: Vec<f64> = (0..cfg.mel_filters + 2)
        .map(|k| mel_to_hz(top * k as f64 / (cfg.mel_filters + 1) as f64))
        .collect();
    let bin_hz: Vec<f64> =
        (0..bins).map(|k| k as f64 * sample_rate as f64 / cfg.fft_size as f64).collect();
    (0..cfg.mel_filters)
        .map(|m| {
            let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            bin_hz
                .iter()
                .map(|&f| {
                    let rising = (f - lo) / (mid - lo);
                    let falling = (hi - f) / (hi - mid);
                    rising.min(falling).max(0.0)
                })
                .collect()
        })
        .collect()
}

/// Orthonormal DCT-II, keeping the first `keep` coefficients.
fn dct2_ortho(input: &[f64], keep: usize) -> Vec<f64> {
    let n = input.len() as f64;
    (0..keep)
        .map(|k| {
            let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            scale
                * input
                    .iter()
                    .enumerate()
                    .map(|(i, x)| x * (PI * k as f64 * (2 * i + 1) as f64 / (2.0 * n)).cos())
                    .sum::<f64>()
        })
        .collect()
}

/// Signed MFCC matrix: `mfcc_coeffs` rows, one column per STFT column.
pub fn mfcc(frame: &Frame, cfg: &DspConfig) -> Result<Vec<Vec<f64>>, DspError> {
    let columns = rfft_columns(frame, cfg)?;
    let bank = mel_filterbank(cfg, frame.sample_rate());
    let per_column: Vec<Vec<f64>> = columns
        .iter()
        .map(|col| {
            let log_mel: Vec<f64> = bank
                .iter()
                .map(|weights| {
                    let energy: f64 = weights.iter().zip(col).map(|(w, c)| w * c.norm_sqr()).sum();
                    energy.max(LOG_FLOOR).ln()
                })
                .collect();
            dct2_ortho(&log_mel, cfg.mfcc_coeffs)
        })
        .collect();
    Ok((0..cfg.mfcc_coeffs)
        .map(|i| per_column.iter().map(|c| c[i]).collect())
        .collect())
}

/// MFCC "spectrogram": absolute coefficient values, rows indexed by
/// coefficient.
pub fn mfcc_spectrogram(frame: &Frame, cfg: &DspConfig) -> Result<Spectrogram, DspError> {
    let coeffs = mfcc(frame, cfg)?;
    let cols = coeffs.first().map_or(0, Vec::len);
    Ok(Spectrogram {
        intensity: coeffs.into_iter().map(|row| row.into_iter().map(f64::abs).collect()).collect(),
        freq_axis: normalized_axis(cfg.mfcc_coeffs),
        time_axis: time_axis(cols, cfg, frame.sample_rate()),
    })
}

pub fn frame_features(frame: &Frame, cfg: &DspConfig) -> Result<FeaturePair, DspError> {
    Ok(FeaturePair {
        mfcc_weighted_sum: weighted_sum(&mfcc_spectrogram(frame, cfg)?),
        spec_weighted_sum: weighted_sum(&stft_magnitude(frame, cfg)?),
    })
}

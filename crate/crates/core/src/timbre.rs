//! Seven timbral-property regressors over the two per-frame features, the
//! timbre dataset CSV format, and a synthetic labelled dataset.

use std::fmt;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio_io::{self, AudioError};
use crate::dsp::{self, DspConfig, DspError, FeaturePair, FEATURE_CONVENTION};
use crate::forest::{self, ForestConfig, ForestError, RegressorModel};
use crate::framing::{self, Frame, FramingConfig, FramingError};
use crate::persist::{ModelKind, Persist};
use crate::synth;

pub const PROPERTIES: [&str; 7] =
    ["boominess", "brightness", "depth", "hardness", "roughness", "sharpness", "warmth"];

pub const LABEL_MIN: f64 = 0.0;
pub const LABEL_MAX: f64 = 100.0;

#[derive(Debug, Error)]
pub enum TimbreError {
    #[error("CSV header must be `path,{expected}`, got `{0}`", expected = PROPERTIES.join(","))]
    MissingColumn(String),
    #[error("row {row}: {column} = {value} lies outside [0, 100]")]
    LabelOutOfRange { row: usize, column: &'static str, value: f64 },
    #[error("row {row}: cannot parse {column}: {reason}")]
    BadValue { row: usize, column: &'static str, reason: String },
    #[error("dataset has no rows")]
    EmptyDataset,
    #[error("audio file for row {row} not found: {path}")]
    MissingAudioFile { row: usize, path: PathBuf },
    #[error("row {row}: {source}")]
    Audio { row: usize, source: AudioError },
    #[error("feature convention mismatch: extractor uses {found:?}, pipeline uses {expected:?}")]
    ConventionMismatch { found: String, expected: String },
    #[error(transparent)]
    Framing(#[from] FramingError),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// Seven timbral properties, each on a 0–100 scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimbralVector(pub [f64; 7]);

impl TimbralVector {
    pub fn clamped(values: [f64; 7]) -> Self {
        Self(values.map(|v| v.clamp(LABEL_MIN, LABEL_MAX)))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, property: &str) -> Option<f64> {
        PROPERTIES.iter().position(|p| *p == property).map(|i| self.0[i])
    }
}

impl fmt::Display for TimbralVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (name, v)) in PROPERTIES.iter().zip(self.0).enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{name}={v:.2}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FrameSource {
    /// WAV file; the first frame of the scaled stream is used.
    Audio(PathBuf),
    Samples(Frame),
    Features(FeaturePair),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimbreRow {
    pub source: FrameSource,
    pub labels: TimbralVector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Labeled,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimbreDataset {
    pub rows: Vec<TimbreRow>,
    pub provenance: Provenance,
}

impl TimbreDataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Computes the feature pair of every row.
    pub fn materialize(
        &self,
        dsp_cfg: &DspConfig,
        framing_cfg: &FramingConfig,
    ) -> Result<Vec<FeaturePair>, TimbreError> {
        self.rows
            .par_iter()
            .enumerate()
            .map(|(row, r)| match &r.source {
                FrameSource::Features(fp) => Ok(*fp),
                FrameSource::Samples(frame) => Ok(dsp::frame_features(frame, dsp_cfg)?),
                FrameSource::Audio(path) => {
                    if !path.exists() {
                        return Err(TimbreError::MissingAudioFile { row, path: path.clone() });
                    }
                    let raw = audio_io::read_wav(path).map_err(|source| TimbreError::Audio { row, source })?;
                    let scaled =
                        audio_io::scale_stream(&raw).map_err(|source| TimbreError::Audio { row, source })?;
                    let frames = framing::partition(&scaled, framing_cfg)?;
                    Ok(dsp::frame_features(&frames[0], dsp_cfg)?)
                }
            })
            .collect()
    }

    /// Writes `timbre.csv` plus one 32-bit float WAV per row into `dir`.
    /// Rows must carry samples.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<PathBuf, TimbreError> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let csv_path = dir.join("timbre.csv");
        let mut w = csv::Writer::from_path(&csv_path)?;
        let mut header = vec!["path"];
        header.extend(PROPERTIES);
        w.write_record(&header)?;
        for (i, row) in self.rows.iter().enumerate() {
            let FrameSource::Samples(frame) = &row.source else {
                return Err(TimbreError::BadValue {
                    row: i,
                    column: "path",
                    reason: "only sample-backed rows can be written".into(),
                });
            };
            let name = format!("frame_{i:04}.wav");
            audio_io::write_wav_f32(dir.join(&name), frame.samples(), frame.sample_rate())
                .map_err(|source| TimbreError::Audio { row: i, source })?;
            let mut record = vec![name];
            record.extend(row.labels.0.iter().map(|v| v.to_string()));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(csv_path)
    }
}

/// Reads a timbre CSV. Audio paths are resolved relative to the CSV's
/// directory and only opened by [`TimbreDataset::materialize`].
pub fn load_timbre_dataset(path: impl AsRef<Path>) -> Result<TimbreDataset, TimbreError> {
    let path = path.as_ref();
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let header = reader.headers()?.clone();
    let expected: Vec<&str> = std::iter::once("path").chain(PROPERTIES).collect();
    if header.iter().map(str::trim).collect::<Vec<_>>() != expected {
        return Err(TimbreError::MissingColumn(header.iter().collect::<Vec<_>>().join(",")));
    }

    let mut rows = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let mut labels = [0.0; 7];
        for (k, column) in PROPERTIES.iter().enumerate() {
            let raw = record.get(k + 1).unwrap_or("").trim();
            let value: f64 = raw.parse().map_err(|e: std::num::ParseFloatError| TimbreError::BadValue {
                row,
                column,
                reason: e.to_string(),
            })?;
            if !(LABEL_MIN..=LABEL_MAX).contains(&value) {
                return Err(TimbreError::LabelOutOfRange { row, column, value });
            }
            labels[k] = value;
        }
        let audio = record.get(0).unwrap_or("").trim();
        rows.push(TimbreRow {
            source: FrameSource::Audio(base.join(audio)),
            labels: TimbralVector(labels),
        });
    }
    if rows.is_empty() {
        return Err(TimbreError::EmptyDataset);
    }
    Ok(TimbreDataset { rows, provenance: Provenance::Labeled })
}

/// Per-property (weight on log-MFCC sum, weight on log-spectrum sum, bias)
/// of the synthetic ground truth, in [`PROPERTIES`] order.
pub const GROUND_TRUTH_MAPS: [(f64, f64, f64); 7] = [
    (-0.6, -0.9, 0.0),
    (0.3, 1.1, 0.1),
    (-0.9, 0.2, -0.2),
    (0.8, 0.6, -0.3),
    (1.0, -0.5, 0.2),
    (0.2, 1.0, -0.1),
    (-0.3, -1.1, 0.0),
];

/// Centre and spread used to standardize the log features before the maps.
const LOG_MFCC_CENTER: f64 = 4.5;
const LOG_MFCC_SCALE: f64 = 0.4;
const LOG_SPEC_CENTER: f64 = 6.0;
const LOG_SPEC_SCALE: f64 = 0.9;

/// Fixed labelling function of the synthetic dataset: each property is
/// `100 · σ(a·u + b·v + c)` with `u`, `v` the standardized logs of the two
/// weighted sums.
pub fn ground_truth(fp: &FeaturePair) -> TimbralVector {
    let u = ((1.0 + fp.mfcc_weighted_sum.max(0.0)).ln() - LOG_MFCC_CENTER) / LOG_MFCC_SCALE;
    let v = ((1.0 + fp.spec_weighted_sum.max(0.0)).ln() - LOG_SPEC_CENTER) / LOG_SPEC_SCALE;
    TimbralVector(GROUND_TRUTH_MAPS.map(|(a, b, c)| 100.0 / (1.0 + (-(a * u + b * v + c)).exp())))
}

/// Synthetic stand-in for a hand-labelled timbre dataset: `n_rows` 0.3 s
/// frames at 16 kHz of random tone/noise mixtures (peak-normalized, stored
/// at `f32` precision), labelled by [`ground_truth`] of their default-config
/// features plus Gaussian noise of `noise_sd`, clamped to [0, 100].
pub fn synth_timbre_dataset(seed: u64, n_rows: usize, noise_sd: f64) -> TimbreDataset {
    const SAMPLE_RATE: u32 = 16_000;
    let frame_len = FramingConfig::default().frame_len(SAMPLE_RATE);
    let dsp_cfg = DspConfig::default();

    let mut audio_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(seed);
    noise_rng.set_stream(1);

    let frames: Vec<Frame> = (0..n_rows)
        .map(|_| {
            let recipe = synth::random_recipe(&mut audio_rng);
            let mut samples = synth::render(&recipe, frame_len, SAMPLE_RATE, &mut audio_rng);
            synth::peak_normalize(&mut samples);
            samples.iter_mut().for_each(|s| *s = *s as f32 as f64);
            Frame::new(samples, SAMPLE_RATE)
        })
        .collect();
    let features: Vec<FeaturePair> = frames
        .par_iter()
        .map(|f| dsp::frame_features(f, &dsp_cfg).expect("synthetic frames fit the default config"))
        .collect();

    let rows = frames
        .into_iter()
        .zip(features)
        .map(|(frame, fp)| {
            let truth = ground_truth(&fp).0;
            let labels = truth.map(|t| {
                let noise: f64 = StandardNormal.sample(&mut noise_rng);
                if noise_sd > 0.0 {
                    t + noise_sd * noise
                } else {
                    t
                }
            });
            TimbreRow { source: FrameSource::Samples(frame), labels: TimbralVector::clamped(labels) }
        })
        .collect();
    TimbreDataset { rows, provenance: Provenance::Synthetic }
}

/// Seven fitted regressors, one per property, over [`FeaturePair`] inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimbreExtractor {
    pub feature_convention: String,
    pub dsp: DspConfig,
    pub framing: FramingConfig,
    pub properties: Vec<String>,
    pub models: Vec<RegressorModel>,
}

impl Persist for TimbreExtractor {
    const KIND: ModelKind = ModelKind::TimbreExtractor;

    fn n_features(&self) -> usize {
        2
    }

    fn class_labels(&self) -> Vec<String> {
        self.properties.clone()
    }
}

/// Fits one regressor per property on identical feature rows. Property `k`
/// uses seed `forest_cfg.rng_seed + k`, so every regressor depends only on
/// the features and its own label column.
pub fn train_timbre_regressors(
    ds: &TimbreDataset,
    dsp_cfg: &DspConfig,
    framing_cfg: &FramingConfig,
    forest_cfg: &ForestConfig,
) -> Result<TimbreExtractor, TimbreError> {
    if ds.is_empty() {
        return Err(TimbreError::EmptyDataset);
    }
    let x: Vec<Vec<f64>> = ds.materialize(dsp_cfg, framing_cfg)?.into_iter().map(FeaturePair::to_vec).collect();
    let models = (0..PROPERTIES.len())
        .into_par_iter()
        .map(|k| {
            let y: Vec<f64> = ds.rows.iter().map(|r| r.labels.0[k]).collect();
            let cfg = ForestConfig { rng_seed: forest_cfg.rng_seed.wrapping_add(k as u64), ..*forest_cfg };
            forest::fit_regressor(&x, &y, &cfg)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TimbreExtractor {
        feature_convention: FEATURE_CONVENTION.to_string(),
        dsp: *dsp_cfg,
        framing: *framing_cfg,
        properties: PROPERTIES.iter().map(|p| p.to_string()).collect(),
        models,
    })
}

impl TimbreExtractor {
    pub fn check_convention(&self) -> Result<(), TimbreError> {
        if self.feature_convention != FEATURE_CONVENTION {
            return Err(TimbreError::ConventionMismatch {
                found: self.feature_convention.clone(),
                expected: FEATURE_CONVENTION.to_string(),
            });
        }
        Ok(())
    }

    /// Seven predictions clamped to [0, 100].
    pub fn extract(&self, fp: &FeaturePair) -> Result<TimbralVector, TimbreError> {
        self.check_convention()?;
        let x = fp.to_vec();
        let mut out = [0.0; 7];
        for (slot, model) in out.iter_mut().zip(&self.models) {
            *slot = model.predict(&x)?;
        }
        Ok(TimbralVector::clamped(out))
    }

    /// Features then timbre for one frame, with this extractor's DSP config.
    pub fn frame_timbre(&self, frame: &Frame) -> Result<TimbralVector, TimbreError> {
        self.extract(&dsp::frame_features(frame, &self.dsp)?)
    }
}

/// Free-function form of [`TimbreExtractor::extract`].
pub fn extract_timbre(ex: &TimbreExtractor, fp: &FeaturePair) -> Result<TimbralVector, TimbreError> {
    ex.extract(fp)
}

/// Coefficient of determination of `pred` against `truth`.
pub fn r_squared(truth: &[f64], pred: &[f64]) -> f64 {
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let ss_tot: f64 = truth.iter().map(|t| (t - mean).powi(2)).sum();
    let ss_res: f64 = truth.iter().zip(pred).map(|(t, p)| (t - p).powi(2)).sum();
    1.0 - ss_res / ss_tot
}

//! Speaker identification (multiclass) and verification (target vs.
//! impostor) over per-frame timbral vectors.
//!
//! A stream runs through scale → partition → silence filter → features →
//! timbre; the classifier then scores every accepted frame. Stream-level
//! identification sums the per-frame probability rows and takes the argmax;
//! verification averages the per-frame target probability.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio_io::{self, AudioError, AudioStream};
use crate::forest::{self, argmax, ClassifierModel, ForestConfig, ForestError};
use crate::framing::{self, FramingError};
use crate::persist::{ModelKind, Persist};
use crate::timbre::{TimbralVector, TimbreError, TimbreExtractor};

#[derive(Debug, Error)]
pub enum RecognitionError {
    #[error("need at least two speakers, got {0}")]
    InsufficientSpeakers(usize),
    #[error("duplicate speaker label {0:?}")]
    DuplicateSpeaker(String),
    #[error("no accepted (non-silent) frames for {0}")]
    NoAcceptedFrames(String),
    #[error("probability matrix is empty")]
    EmptyMatrix,
    #[error("decision threshold {0} outside [0, 1]")]
    InvalidThreshold(f64),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Framing(#[from] FramingError),
    #[error(transparent)]
    Timbre(#[from] TimbreError),
    #[error(transparent)]
    Forest(#[from] ForestError),
}

/// All recordings of one speaker.
#[derive(Debug, Clone)]
pub struct SpeakerAudio {
    pub name: String,
    pub streams: Vec<AudioStream>,
}

/// Timbral vectors of the accepted frames of `stream`, in frame order.
///
/// Pure-silence streams and streams shorter than one frame yield no frames
/// rather than an error; callers decide whether that is fatal.
pub fn stream_timbre(
    extractor: &TimbreExtractor,
    stream: &AudioStream,
) -> Result<Vec<TimbralVector>, RecognitionError> {
    let scaled = match audio_io::scale_stream(stream) {
        Ok(s) => s,
        Err(AudioError::SilentStream) => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let frames = match framing::partition(&scaled, &extractor.framing) {
        Ok(f) => f,
        Err(FramingError::StreamTooShort { .. }) => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    framing::filter_silence(frames, &extractor.framing)
        .par_iter()
        .map(|f| Ok(extractor.frame_timbre(f)?))
        .collect()
}

/// Timbral vectors for every stream of every speaker: `[speaker][stream][frame]`.
pub fn corpus_timbre(
    extractor: &TimbreExtractor,
    corpus: &[SpeakerAudio],
) -> Result<Vec<Vec<Vec<TimbralVector>>>, RecognitionError> {
    corpus
        .iter()
        .map(|spk| spk.streams.iter().map(|s| stream_timbre(extractor, s)).collect())
        .collect()
}

fn rows(frames: &[TimbralVector]) -> impl Iterator<Item = Vec<f64>> + '_ {
    frames.iter().map(|tv| tv.0.to_vec())
}

/// 64-bit FNV-1a over the canonical JSON of the pipeline configuration.
pub fn config_fingerprint(extractor: &TimbreExtractor, classifier: &ForestConfig) -> String {
    let text = serde_json::to_string(&(&extractor.feature_convention, &extractor.framing, &extractor.dsp, classifier))
        .expect("configs serialize");
    let hash = text.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3));
    format!("{hash:016x}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerModel {
    pub labels: Vec<String>,
    pub fingerprint: String,
    pub classifier: ClassifierModel,
    pub extractor: TimbreExtractor,
}

impl Persist for SpeakerModel {
    const KIND: ModelKind = ModelKind::SpeakerIdentifier;

    fn n_features(&self) -> usize {
        self.classifier.n_features
    }

    fn class_labels(&self) -> Vec<String> {
        self.labels.clone()
    }
}

/// Per-frame decision: argmax label index (lowest index on ties) and the
/// probability vector it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameDecision {
    pub index: usize,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamDecision {
    pub index: usize,
    pub label: String,
    /// Unnormalized column sums of the per-frame probability matrix.
    pub scores: Vec<f64>,
    pub frames_used: usize,
    /// The per-frame rows the scores were summed from.
    pub frame_probs: Vec<Vec<f64>>,
}

impl StreamDecision {
    /// Scores divided by the number of frames.
    pub fn mean_scores(&self) -> Vec<f64> {
        self.scores.iter().map(|s| s / self.frames_used as f64).collect()
    }
}

/// Column sums of a probability matrix (rows = frames, columns = speakers).
/// Deliberately not renormalized; the argmax is unaffected.
pub fn aggregate(matrix: &[Vec<f64>]) -> Result<Vec<f64>, RecognitionError> {
    let first = matrix.first().ok_or(RecognitionError::EmptyMatrix)?;
    let mut sums = vec![0.0; first.len()];
    for row in matrix {
        for (s, p) in sums.iter_mut().zip(row) {
            *s += p;
        }
    }
    Ok(sums)
}

fn check_labels(labels: &[String]) -> Result<(), RecognitionError> {
    if labels.len() < 2 {
        return Err(RecognitionError::InsufficientSpeakers(labels.len()));
    }
    let mut seen = std::collections::BTreeSet::new();
    for l in labels {
        if !seen.insert(l) {
            return Err(RecognitionError::DuplicateSpeaker(l.clone()));
        }
    }
    Ok(())
}

/// Fits the identifier on precomputed per-speaker frame vectors (all of a
/// speaker's streams flattened).
pub fn train_identifier_from_frames(
    labels: Vec<String>,
    frames: &[Vec<TimbralVector>],
    extractor: &TimbreExtractor,
    cfg: &ForestConfig,
) -> Result<SpeakerModel, RecognitionError> {
    check_labels(&labels)?;
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (k, (label, spk)) in labels.iter().zip(frames).enumerate() {
        if spk.is_empty() {
            return Err(RecognitionError::NoAcceptedFrames(label.clone()));
        }
        x.extend(rows(spk));
        y.extend(std::iter::repeat_n(k, spk.len()));
    }
    let classifier = forest::fit_classifier(&x, &y, cfg)?;
    Ok(SpeakerModel {
        fingerprint: config_fingerprint(extractor, cfg),
        labels,
        classifier,
        extractor: extractor.clone(),
    })
}

/// Runs the full pipeline over each speaker's streams and fits the
/// identifier on the resulting frame-level timbral vectors.
pub fn train_identifier(
    corpus: &[SpeakerAudio],
    extractor: &TimbreExtractor,
    cfg: &ForestConfig,
) -> Result<SpeakerModel, RecognitionError> {
    let labels: Vec<String> = corpus.iter().map(|s| s.name.clone()).collect();
    check_labels(&labels)?;
    let frames: Vec<Vec<TimbralVector>> =
        corpus_timbre(extractor, corpus)?.into_iter().map(|streams| streams.concat()).collect();
    train_identifier_from_frames(labels, &frames, extractor, cfg)
}

impl SpeakerModel {
    pub fn identify_frame(&self, tv: &TimbralVector) -> Result<FrameDecision, RecognitionError> {
        let probs = self.classifier.predict_proba(tv.as_slice())?;
        Ok(FrameDecision { index: argmax(&probs), probs })
    }

    /// Identification from already-extracted frames.
    pub fn identify_frames(&self, frames: &[TimbralVector]) -> Result<StreamDecision, RecognitionError> {
        if frames.is_empty() {
            return Err(RecognitionError::NoAcceptedFrames("stream".into()));
        }
        let frame_probs = frames
            .iter()
            .map(|tv| self.classifier.predict_proba(tv.as_slice()))
            .collect::<Result<Vec<_>, _>>()?;
        let scores = aggregate(&frame_probs)?;
        let index = argmax(&scores);
        Ok(StreamDecision {
            index,
            label: self.labels[index].clone(),
            scores,
            frames_used: frames.len(),
            frame_probs,
        })
    }

    pub fn identify_stream(&self, stream: &AudioStream) -> Result<StreamDecision, RecognitionError> {
        self.identify_frames(&stream_timbre(&self.extractor, stream)?)
    }

    /// One-vs-rest verification score for `target`: mean per-frame
    /// probability of that speaker's column.
    pub fn one_vs_rest_score(&self, target: usize, frames: &[TimbralVector]) -> Result<f64, RecognitionError> {
        let d = self.identify_frames(frames)?;
        Ok(d.scores[target] / d.frames_used as f64)
    }
}

/// Binary target-vs-impostor forest. Class 1 is the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifierModel {
    pub target: String,
    pub threshold: f64,
    pub fingerprint: String,
    pub classifier: ClassifierModel,
    pub extractor: TimbreExtractor,
}

impl Persist for VerifierModel {
    const KIND: ModelKind = ModelKind::SpeakerVerifier;

    fn n_features(&self) -> usize {
        self.classifier.n_features
    }

    fn class_labels(&self) -> Vec<String> {
        vec!["impostor".into(), self.target.clone()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyDecision {
    pub accept: bool,
    pub score: f64,
    pub frames_used: usize,
}

pub const DEFAULT_THRESHOLD: f64 = 0.5;

pub fn train_verifier_from_frames(
    target: &str,
    target_frames: &[TimbralVector],
    impostor_frames: &[TimbralVector],
    extractor: &TimbreExtractor,
    cfg: &ForestConfig,
) -> Result<VerifierModel, RecognitionError> {
    if target_frames.is_empty() {
        return Err(RecognitionError::NoAcceptedFrames(format!("target {target}")));
    }
    if impostor_frames.is_empty() {
        return Err(RecognitionError::NoAcceptedFrames("impostors".into()));
    }
    let x: Vec<Vec<f64>> = rows(impostor_frames).chain(rows(target_frames)).collect();
    let y: Vec<usize> = std::iter::repeat_n(0, impostor_frames.len())
        .chain(std::iter::repeat_n(1, target_frames.len()))
        .collect();
    Ok(VerifierModel {
        target: target.to_string(),
        threshold: DEFAULT_THRESHOLD,
        fingerprint: config_fingerprint(extractor, cfg),
        classifier: forest::fit_classifier(&x, &y, cfg)?,
        extractor: extractor.clone(),
    })
}

pub fn train_verifier(
    target: &str,
    target_streams: &[AudioStream],
    impostor_streams: &[AudioStream],
    extractor: &TimbreExtractor,
    cfg: &ForestConfig,
) -> Result<VerifierModel, RecognitionError> {
    let collect = |streams: &[AudioStream]| -> Result<Vec<TimbralVector>, RecognitionError> {
        Ok(streams.iter().map(|s| stream_timbre(extractor, s)).collect::<Result<Vec<_>, _>>()?.concat())
    };
    train_verifier_from_frames(target, &collect(target_streams)?, &collect(impostor_streams)?, extractor, cfg)
}

impl VerifierModel {
    pub fn with_threshold(mut self, threshold: f64) -> Result<Self, RecognitionError> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(RecognitionError::InvalidThreshold(threshold));
        }
        self.threshold = threshold;
        Ok(self)
    }

    pub fn frame_score(&self, tv: &TimbralVector) -> Result<f64, RecognitionError> {
        Ok(self.classifier.predict_proba(tv.as_slice())?[1])
    }

    /// Mean per-frame target probability, compared against the threshold.
    pub fn verify_frames(&self, frames: &[TimbralVector]) -> Result<VerifyDecision, RecognitionError> {
        if frames.is_empty() {
            return Err(RecognitionError::NoAcceptedFrames("stream".into()));
        }
        let scores = frames.iter().map(|tv| self.frame_score(tv)).collect::<Result<Vec<_>, _>>()?;
        Ok(decide(&scores, self.threshold))
    }

    pub fn verify_stream(&self, stream: &AudioStream) -> Result<VerifyDecision, RecognitionError> {
        self.verify_frames(&stream_timbre(&self.extractor, stream)?)
    }
}

/// Mean of per-frame scores and the accept decision at `threshold`.
pub fn decide(frame_scores: &[f64], threshold: f64) -> VerifyDecision {
    let score = frame_scores.iter().sum::<f64>() / frame_scores.len() as f64;
    VerifyDecision { accept: score >= threshold, score, frames_used: frame_scores.len() }
}

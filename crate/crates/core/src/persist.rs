//! Versioned JSON container shared by every serialized model.
//!
//! Layout (keys in this order, compact JSON, UTF-8):
//! `format`, `format_version`, `kind`, `feature_convention`, `n_features`,
//! `class_labels`, `payload`. Serialization is canonical: the same model
//! always produces the same bytes.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::FEATURE_CONVENTION;
use crate::forest::{ClassifierModel, RegressorModel};

pub const FORMAT: &str = "timbre-model";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("corrupt model file: {0}")]
    CorruptModel(String),
    #[error("model version mismatch: {0}")]
    VersionMismatch(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Classifier,
    Regressor,
    TimbreExtractor,
    SpeakerIdentifier,
    SpeakerVerifier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Envelope<T> {
    pub format: String,
    pub format_version: u32,
    pub kind: ModelKind,
    pub feature_convention: String,
    pub n_features: usize,
    pub class_labels: Vec<String>,
    pub payload: T,
}

impl<T> Envelope<T> {
    pub fn new(kind: ModelKind, n_features: usize, class_labels: Vec<String>, payload: T) -> Self {
        Self {
            format: FORMAT.to_string(),
            format_version: FORMAT_VERSION,
            kind,
            feature_convention: FEATURE_CONVENTION.to_string(),
            n_features,
            class_labels,
            payload,
        }
    }
}

/// Implemented by every model type that can be written to disk.
pub trait Persist: Sized + Serialize + DeserializeOwned {
    const KIND: ModelKind;

    fn n_features(&self) -> usize;

    fn class_labels(&self) -> Vec<String> {
        Vec::new()
    }

    fn to_bytes(&self) -> Vec<u8> {
        let env = Envelope::new(Self::KIND, self.n_features(), self.class_labels(), self);
        serde_json::to_vec(&env).expect("models serialize infallibly")
    }

    fn from_bytes(bytes: &[u8]) -> Result<Self, PersistError> {
        let header: Header = serde_json::from_slice(bytes)
            .map_err(|e| PersistError::CorruptModel(e.to_string()))?;
        if header.format != FORMAT {
            return Err(PersistError::CorruptModel(format!("unknown format {:?}", header.format)));
        }
        if header.format_version != FORMAT_VERSION {
            return Err(PersistError::VersionMismatch(format!(
                "file format version {} but this build reads {}",
                header.format_version, FORMAT_VERSION
            )));
        }
        if header.kind != Self::KIND {
            return Err(PersistError::VersionMismatch(format!(
                "expected a {:?} model, found {:?}",
                Self::KIND,
                header.kind
            )));
        }
        if header.feature_convention != FEATURE_CONVENTION {
            return Err(PersistError::VersionMismatch(format!(
                "model features use convention {:?}, pipeline uses {:?}",
                header.feature_convention, FEATURE_CONVENTION
            )));
        }
        let env: Envelope<Self> = serde_json::from_slice(bytes)
            .map_err(|e| PersistError::CorruptModel(e.to_string()))?;
        if env.n_features != env.payload.n_features() {
            return Err(PersistError::CorruptModel("feature count disagrees with payload".into()));
        }
        Ok(env.payload)
    }

    fn save(&self, path: impl AsRef<Path>) -> Result<(), PersistError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    fn load(path: impl AsRef<Path>) -> Result<Self, PersistError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

#[derive(Deserialize)]
struct Header {
    format: String,
    format_version: u32,
    kind: ModelKind,
    feature_convention: String,
}

impl Persist for ClassifierModel {
    const KIND: ModelKind = ModelKind::Classifier;

    fn n_features(&self) -> usize {
        self.n_features
    }

    fn class_labels(&self) -> Vec<String> {
        (0..self.n_classes).map(|c| c.to_string()).collect()
    }
}

impl Persist for RegressorModel {
    const KIND: ModelKind = ModelKind::Regressor;

    fn n_features(&self) -> usize {
        self.n_features
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::{fit_classifier, fit_regressor, ForestConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn data() -> (Vec<Vec<f64>>, Vec<usize>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<Vec<f64>> =
            (0..80).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let y = x.iter().map(|r| usize::from(r[0] + r[1] > 0.0) + usize::from(r[2] > 0.5)).collect();
        let t = x.iter().map(|r| r[0] * 10.0 - r[2].powi(2)).collect();
        (x, y, t)
    }

    #[test]
    fn round_trip_predictions_are_bitwise_identical() {
        let (x, y, t) = data();
        let cfg = ForestConfig { n_trees: 20, rng_seed: 11, ..Default::default() };
        let clf = fit_classifier(&x, &y, &cfg).unwrap();
        let reg = fit_regressor(&x, &t, &cfg).unwrap();
        let clf2 = ClassifierModel::from_bytes(&clf.to_bytes()).unwrap();
        let reg2 = RegressorModel::from_bytes(&reg.to_bytes()).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..1000 {
            let probe: Vec<f64> = (0..3).map(|_| rng.random_range(-1.5..1.5)).collect();
            let (a, b) = (clf.predict_proba(&probe).unwrap(), clf2.predict_proba(&probe).unwrap());
            assert!(a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()));
            assert_eq!(reg.predict(&probe).unwrap().to_bits(), reg2.predict(&probe).unwrap().to_bits());
        }
        assert_eq!(clf.to_bytes(), clf2.to_bytes());
    }

    #[test]
    fn truncated_and_mismatched_files() {
        let (x, y, _) = data();
        let clf = fit_classifier(&x, &y, &ForestConfig { n_trees: 2, ..Default::default() }).unwrap();
        let bytes = clf.to_bytes();
        assert!(matches!(
            ClassifierModel::from_bytes(&bytes[..bytes.len() / 2]),
            Err(PersistError::CorruptModel(_))
        ));
        assert!(matches!(RegressorModel::from_bytes(&bytes), Err(PersistError::VersionMismatch(_))));

        let text = String::from_utf8(bytes.clone()).unwrap();
        let other = text.replacen(FEATURE_CONVENTION, "ws-v0", 1);
        assert!(matches!(
            ClassifierModel::from_bytes(other.as_bytes()),
            Err(PersistError::VersionMismatch(_))
        ));
        let newer = text.replacen("\"format_version\":1", "\"format_version\":2", 1);
        assert!(matches!(
            ClassifierModel::from_bytes(newer.as_bytes()),
            Err(PersistError::VersionMismatch(_))
        ));
    }

    #[test]
    fn header_field_order_is_fixed() {
        let (x, y, _) = data();
        let clf = fit_classifier(&x, &y, &ForestConfig { n_trees: 1, ..Default::default() }).unwrap();
        let text = String::from_utf8(clf.to_bytes()).unwrap();
        assert!(text.starts_with(r#"{"format":"timbre-model","format_version":1,"kind":"classifier","feature_convention":"#));
    }
}

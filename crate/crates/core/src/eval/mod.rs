//! Metrics and experiment harnesses: accuracy against population size,
//! verification ROC/AUC/EER, and report emission.

mod experiment;
mod metrics;
mod report;

pub use experiment::{
    run_identification_experiment, run_verification_experiment, CorpusTimbre, EvalReport, ExperimentConfig,
    PopulationResult, SeedResult, TargetResult, Timing, VerifyMode,
};
pub use metrics::{accuracy, auc, eer, eer_point, roc_curve, spearman, ConfusionCounts, RocCurve, RocPoint};
pub use report::{emit_report, EmittedFiles};

use thiserror::Error;

use crate::recognition::RecognitionError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("confusion counts are all zero")]
    EmptyCounts,
    #[error("ROC needs both positive and negative labels")]
    SingleClassLabels,
    #[error("population of {requested} speakers requested but the corpus has {available}")]
    CorpusTooSmall { requested: usize, available: usize },
    #[error("unknown target speaker {0:?}")]
    UnknownTarget(String),
    #[error("invalid experiment configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Recognition(#[from] RecognitionError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

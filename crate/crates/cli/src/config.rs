use std::path::{Path, PathBuf};

use serde::Deserialize;
use timbre_core::dsp::DspConfig;
use timbre_core::forest::ForestConfig;
use timbre_core::framing::FramingConfig;

use crate::CliError;

/// One TOML file governing a full run. Every section is optional and falls
/// back to the library defaults; unknown keys are rejected.
///
/// ```toml
/// [framing]
/// frame_seconds = 0.3
/// silence_threshold = 0.05
///
/// [dsp]
/// fft_size = 512
/// hop_size = 128
/// mel_filters = 40
/// mfcc_coeffs = 13
/// window = "hann"
///
/// [regressor]            # timbre regressors
/// n_trees = 100
/// rng_seed = 0
///
/// [classifier]           # speaker identifier / verifier
/// n_trees = 100
/// rng_seed = 0
///
/// [evaluation]
/// train_fraction = 0.7
/// seeds = [0, 1, 2]
///
/// [paths]
/// dataset = "data/timbre.csv"
/// timbre_model = "models/timbre.json"
/// corpus = "data/corpus"
/// ```
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub framing: FramingConfig,
    pub dsp: DspConfig,
    pub regressor: ForestConfig,
    pub classifier: ForestConfig,
    pub evaluation: EvaluationSection,
    pub paths: PathsSection,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationSection {
    pub train_fraction: f64,
    pub seeds: Vec<u64>,
    /// Empty means 2 through the corpus size.
    pub populations: Vec<usize>,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        Self { train_fraction: 0.7, seeds: vec![0, 1, 2], populations: Vec::new() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsSection {
    pub dataset: Option<PathBuf>,
    pub timbre_model: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
}

impl PipelineConfig {
    /// Reads and validates `path`; `None` gives the defaults. Relative paths
    /// in `[paths]` resolve against the config file's directory.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: Self = toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.paths.dataset, &mut cfg.paths.timbre_model, &mut cfg.paths.corpus].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.framing.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.dsp.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.regressor.validate().map_err(|e| CliError::Config(format!("[regressor] {e}")))?;
        self.classifier.validate().map_err(|e| CliError::Config(format!("[classifier] {e}")))?;
        let ev = &self.evaluation;
        if !(ev.train_fraction > 0.0 && ev.train_fraction <= 1.0) {
            return Err(CliError::Config(format!("[evaluation] train_fraction {} not in (0, 1]", ev.train_fraction)));
        }
        Ok(())
    }
}

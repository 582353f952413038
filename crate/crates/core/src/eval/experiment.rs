use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{accuracy, auc, eer, roc_curve, spearman, ConfusionCounts, RocCurve};
use super::EvalError;
use crate::forest::{argmax, ForestConfig};
use crate::recognition::{
    self, config_fingerprint, train_identifier_from_frames, train_verifier_from_frames, RecognitionError,
    SpeakerAudio, SpeakerModel, DEFAULT_THRESHOLD,
};
use crate::timbre::{TimbralVector, TimbreExtractor};

/// Timbral vectors of a whole corpus, `streams[speaker][stream][frame]`.
/// Extracting once and reusing it across seeds and population sizes keeps
/// experiments cheap.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusTimbre {
    pub labels: Vec<String>,
    pub streams: Vec<Vec<Vec<TimbralVector>>>,
}

impl CorpusTimbre {
    pub fn from_audio(extractor: &TimbreExtractor, corpus: &[SpeakerAudio]) -> Result<Self, EvalError> {
        Ok(Self {
            labels: corpus.iter().map(|s| s.name.clone()).collect(),
            streams: recognition::corpus_timbre(extractor, corpus)?,
        })
    }

    pub fn n_speakers(&self) -> usize {
        self.labels.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerifyMode {
    /// Per-target binary forest, target vs. pooled impostor frames.
    Binary,
    /// Target column of the multiclass identifier.
    OneVsRest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Fraction of each speaker's streams used for training.
    pub train_fraction: f64,
    pub seeds: Vec<u64>,
    pub classifier: ForestConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self { train_fraction: 0.7, seeds: vec![0, 1, 2], classifier: ForestConfig::default() }
    }
}

impl ExperimentConfig {
    fn validate(&self) -> Result<(), EvalError> {
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return Err(EvalError::InvalidConfig(format!("train_fraction {} not in (0, 1]", self.train_fraction)));
        }
        if self.seeds.is_empty() {
            return Err(EvalError::InvalidConfig("no seeds".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub speakers: Vec<String>,
    pub test_streams: usize,
    pub stream_accuracy: f64,
    pub frame_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationResult {
    pub population: usize,
    /// Means over seeds.
    pub stream_accuracy: f64,
    pub frame_accuracy: f64,
    pub per_seed: Vec<SeedResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetResult {
    pub target: String,
    pub positives: usize,
    pub negatives: usize,
    pub stream_accuracy: Option<f64>,
    pub frame_accuracy: Option<f64>,
    pub auc: Option<f64>,
    pub eer: Option<f64>,
    pub roc: Option<RocCurve>,
    /// Set when the target could not be evaluated; other targets still run.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub experiment_id: String,
    pub config_fingerprint: String,
    pub config: ExperimentConfig,
    pub speakers: Vec<String>,
    pub verify_mode: Option<VerifyMode>,
    pub populations: Vec<PopulationResult>,
    /// Spearman correlation between population size and mean stream accuracy.
    pub population_spearman: Option<f64>,
    pub targets: Vec<TargetResult>,
    /// Wall-clock data; kept out of `report.json` so re-runs compare equal.
    #[serde(skip)]
    pub timings: Vec<Timing>,
}

fn fnv(text: &str) -> String {
    let hash = text.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3));
    format!("{hash:016x}")
}

fn fingerprint(extractor: &TimbreExtractor, cfg: &ExperimentConfig, extra: &str) -> String {
    let cfg_json = serde_json::to_string(cfg).expect("config serializes");
    fnv(&format!("{}|{cfg_json}|{extra}", config_fingerprint(extractor, &cfg.classifier)))
}

/// In-place Fisher–Yates with 64-bit draws, so the order is the same on
/// every platform.
fn shuffle<T>(items: &mut [T], rng: &mut ChaCha8Rng) {
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i as u64) as usize;
        items.swap(i, j);
    }
}

/// Stream-level split of one speaker: `(train, test)` stream indices.
fn split_streams(n: usize, train_fraction: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    shuffle(&mut idx, rng);
    let n_train = ((train_fraction * n as f64).round() as usize).clamp(1.min(n), n);
    let test = idx.split_off(n_train);
    (idx, test)
}

fn gather(streams: &[Vec<TimbralVector>], which: &[usize]) -> Vec<TimbralVector> {
    which.iter().flat_map(|&i| streams[i].iter().copied()).collect()
}

fn seeded_classifier(cfg: &ExperimentConfig, seed: u64) -> ForestConfig {
    ForestConfig { rng_seed: cfg.classifier.rng_seed ^ seed.wrapping_mul(0x9E37_79B9_7F4A_7C15), ..cfg.classifier }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

/// Identification accuracy against population size. For each size `k` and
/// seed, `k` speakers are drawn, each speaker's streams are split into
/// train/test sets, an identifier is fitted on the training frames and
/// every held-out stream is classified. Test streams without accepted
/// frames count as misidentified.
pub fn run_identification_experiment(
    corpus: &CorpusTimbre,
    extractor: &TimbreExtractor,
    populations: &[usize],
    cfg: &ExperimentConfig,
) -> Result<EvalReport, EvalError> {
    cfg.validate()?;
    let available = corpus.n_speakers();
    if let Some(&k) = populations.iter().find(|&&k| k > available) {
        return Err(EvalError::CorpusTooSmall { requested: k, available });
    }
    if let Some(&k) = populations.iter().find(|&&k| k < 2) {
        return Err(RecognitionError::InsufficientSpeakers(k).into());
    }
    let mut timings = Vec::new();
    let mut results = Vec::with_capacity(populations.len());
    for &k in populations {
        let start = Instant::now();
        let per_seed = cfg
            .seeds
            .iter()
            .map(|&seed| identification_trial(corpus, extractor, k, seed, cfg))
            .collect::<Result<Vec<_>, _>>()?;
        timings.push(Timing { stage: format!("population_{k}"), seconds: start.elapsed().as_secs_f64() });
        results.push(PopulationResult {
            population: k,
            stream_accuracy: mean(per_seed.iter().map(|r| r.stream_accuracy)),
            frame_accuracy: mean(per_seed.iter().map(|r| r.frame_accuracy)),
            per_seed,
        });
    }
    let population_spearman = (results.len() >= 2).then(|| {
        let ks: Vec<f64> = results.iter().map(|r| r.population as f64).collect();
        let acc: Vec<f64> = results.iter().map(|r| r.stream_accuracy).collect();
        spearman(&ks, &acc)
    });
    let extra = format!("identify|{populations:?}|{:?}", corpus.labels);
    let config_fingerprint = fingerprint(extractor, cfg, &extra);
    Ok(EvalReport {
        experiment_id: format!("identify-{config_fingerprint}"),
        config_fingerprint,
        config: cfg.clone(),
        speakers: corpus.labels.clone(),
        verify_mode: None,
        populations: results,
        population_spearman,
        targets: Vec::new(),
        timings,
    })
}

fn identification_trial(
    corpus: &CorpusTimbre,
    extractor: &TimbreExtractor,
    k: usize,
    seed: u64,
    cfg: &ExperimentConfig,
) -> Result<SeedResult, EvalError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k as u64);
    let mut chosen: Vec<usize> = (0..corpus.n_speakers()).collect();
    shuffle(&mut chosen, &mut rng);
    chosen.truncate(k);
    chosen.sort_unstable();

    let mut train = Vec::with_capacity(k);
    let mut test = Vec::with_capacity(k);
    for &s in &chosen {
        let (tr, te) = split_streams(corpus.streams[s].len(), cfg.train_fraction, &mut rng);
        train.push(gather(&corpus.streams[s], &tr));
        test.push(te);
    }
    let labels: Vec<String> = chosen.iter().map(|&s| corpus.labels[s].clone()).collect();
    let model = train_identifier_from_frames(labels.clone(), &train, extractor, &seeded_classifier(cfg, seed))?;

    let (mut streams_ok, mut streams_total) = (0u64, 0u64);
    let (mut frames_ok, mut frames_total) = (0u64, 0u64);
    for (truth, (&s, test_idx)) in chosen.iter().zip(&test).enumerate() {
        for &i in test_idx {
            let frames = &corpus.streams[s][i];
            streams_total += 1;
            if frames.is_empty() {
                continue;
            }
            let d = model.identify_frames(frames)?;
            streams_ok += u64::from(d.index == truth);
            frames_total += d.frame_probs.len() as u64;
            frames_ok += d.frame_probs.iter().filter(|p| argmax(p) == truth).count() as u64;
        }
    }
    let rate = |ok: u64, total: u64| {
        accuracy(&ConfusionCounts::new(ok, 0, total - ok, 0)).map_err(|_| {
            EvalError::InvalidConfig(format!("population {k}, seed {seed}: no held-out streams to test"))
        })
    };
    Ok(SeedResult {
        seed,
        speakers: labels,
        test_streams: streams_total as usize,
        stream_accuracy: rate(streams_ok, streams_total)?,
        frame_accuracy: if frames_total == 0 { 0.0 } else { rate(frames_ok, frames_total)? },
    })
}

#[derive(Default)]
struct TargetTally {
    scores: Vec<f64>,
    labels: Vec<bool>,
    stream: ConfusionCounts,
    frame: ConfusionCounts,
}

/// Per-target verification. For every seed all speakers' streams are split
/// train/test; in [`VerifyMode::Binary`] a target-vs-impostor forest is fit
/// per target, in [`VerifyMode::OneVsRest`] a single identifier over all
/// speakers provides the target's column. Held-out streams of the target are
/// positives, held-out streams of everyone else are negatives. Stream scores
/// are pooled over seeds for the ROC.
pub fn run_verification_experiment(
    corpus: &CorpusTimbre,
    extractor: &TimbreExtractor,
    targets: &[String],
    mode: VerifyMode,
    cfg: &ExperimentConfig,
) -> Result<EvalReport, EvalError> {
    cfg.validate()?;
    if corpus.n_speakers() < 2 {
        return Err(EvalError::CorpusTooSmall { requested: 2, available: corpus.n_speakers() });
    }
    let target_idx = targets
        .iter()
        .map(|t| corpus.labels.iter().position(|l| l == t).ok_or_else(|| EvalError::UnknownTarget(t.clone())))
        .collect::<Result<Vec<_>, _>>()?;

    let start = Instant::now();
    let mut tallies: Vec<TargetTally> = targets.iter().map(|_| TargetTally::default()).collect();
    let mut failures: Vec<Option<String>> = vec![None; targets.len()];
    for &seed in &cfg.seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(u64::MAX);
        let splits: Vec<(Vec<usize>, Vec<usize>)> =
            corpus.streams.iter().map(|s| split_streams(s.len(), cfg.train_fraction, &mut rng)).collect();
        let train: Vec<Vec<TimbralVector>> =
            corpus.streams.iter().zip(&splits).map(|(s, (tr, _))| gather(s, tr)).collect();
        let classifier = seeded_classifier(cfg, seed);
        let identifier = match mode {
            VerifyMode::OneVsRest => {
                Some(train_identifier_from_frames(corpus.labels.clone(), &train, extractor, &classifier)?)
            }
            VerifyMode::Binary => None,
        };
        for (t, &target) in target_idx.iter().enumerate() {
            if failures[t].is_some() {
                continue;
            }
            let outcome = verification_trial(corpus, extractor, &splits, &train, target, identifier.as_ref(), &classifier);
            match outcome {
                Ok(trial) => {
                    let tally = &mut tallies[t];
                    tally.scores.extend(trial.scores);
                    tally.labels.extend(trial.labels);
                    add(&mut tally.stream, trial.stream);
                    add(&mut tally.frame, trial.frame);
                }
                Err(e) => failures[t] = Some(e.to_string()),
            }
        }
    }

    let results = targets
        .iter()
        .zip(tallies)
        .zip(failures)
        .map(|((target, tally), failure)| summarize(target, tally, failure))
        .collect();
    let extra = format!("verify|{mode:?}|{targets:?}|{:?}", corpus.labels);
    let config_fingerprint = fingerprint(extractor, cfg, &extra);
    Ok(EvalReport {
        experiment_id: format!("verify-{config_fingerprint}"),
        config_fingerprint,
        config: cfg.clone(),
        speakers: corpus.labels.clone(),
        verify_mode: Some(mode),
        populations: Vec::new(),
        population_spearman: None,
        targets: results,
        timings: vec![Timing { stage: "verification".into(), seconds: start.elapsed().as_secs_f64() }],
    })
}

fn add(a: &mut ConfusionCounts, b: ConfusionCounts) {
    a.tp += b.tp;
    a.tn += b.tn;
    a.fp += b.fp;
    a.fn_ += b.fn_;
}

struct Trial {
    scores: Vec<f64>,
    labels: Vec<bool>,
    stream: ConfusionCounts,
    frame: ConfusionCounts,
}

fn verification_trial(
    corpus: &CorpusTimbre,
    extractor: &TimbreExtractor,
    splits: &[(Vec<usize>, Vec<usize>)],
    train: &[Vec<TimbralVector>],
    target: usize,
    identifier: Option<&SpeakerModel>,
    classifier: &ForestConfig,
) -> Result<Trial, EvalError> {
    if splits[target].1.is_empty() {
        return Err(EvalError::InvalidConfig(format!("target {} has no test streams", corpus.labels[target])));
    }
    let binary = match identifier {
        Some(_) => None,
        None => {
            let impostors: Vec<TimbralVector> = train
                .iter()
                .enumerate()
                .filter(|&(s, _)| s != target)
                .flat_map(|(_, f)| f.iter().copied())
                .collect();
            Some(train_verifier_from_frames(
                &corpus.labels[target],
                &train[target],
                &impostors,
                extractor,
                classifier,
            )?)
        }
    };
    let frame_scores = |frames: &[TimbralVector]| -> Result<Vec<f64>, RecognitionError> {
        match (&binary, identifier) {
            (Some(v), _) => frames.iter().map(|tv| v.frame_score(tv)).collect(),
            (None, Some(m)) => frames.iter().map(|tv| Ok(m.identify_frame(tv)?.probs[target])).collect(),
            (None, None) => unreachable!("one scorer is always present"),
        }
    };

    let mut trial =
        Trial { scores: Vec::new(), labels: Vec::new(), stream: ConfusionCounts::default(), frame: ConfusionCounts::default() };
    for (s, (_, test)) in splits.iter().enumerate() {
        let positive = s == target;
        for &i in test {
            let frames = &corpus.streams[s][i];
            // streams without accepted frames carry no evidence and are
            // rejected with score 0
            let fs = frame_scores(frames)?;
            let score = if fs.is_empty() { 0.0 } else { recognition::decide(&fs, DEFAULT_THRESHOLD).score };
            trial.scores.push(score);
            trial.labels.push(positive);
            add(&mut trial.stream, ConfusionCounts::from_decisions(&[score >= DEFAULT_THRESHOLD], &[positive]));
            let decisions: Vec<bool> = fs.iter().map(|&p| p >= DEFAULT_THRESHOLD).collect();
            add(&mut trial.frame, ConfusionCounts::from_decisions(&decisions, &vec![positive; decisions.len()]));
        }
    }
    Ok(trial)
}

fn summarize(target: &str, tally: TargetTally, failure: Option<String>) -> TargetResult {
    let positives = tally.labels.iter().filter(|&&l| l).count();
    let mut result = TargetResult {
        target: target.to_string(),
        positives,
        negatives: tally.labels.len() - positives,
        stream_accuracy: None,
        frame_accuracy: None,
        auc: None,
        eer: None,
        roc: None,
        error: failure,
    };
    if result.error.is_some() {
        return result;
    }
    result.stream_accuracy = accuracy(&tally.stream).ok();
    result.frame_accuracy = accuracy(&tally.frame).ok();
    match roc_curve(&tally.scores, &tally.labels) {
        Ok(curve) => {
            result.auc = Some(auc(&curve));
            result.eer = Some(eer(&curve));
            result.roc = Some(curve);
        }
        Err(e) => result.error = Some(e.to_string()),
    }
    result
}

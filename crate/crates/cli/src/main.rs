mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;
use timbre_core::audio_io::{self, AudioError};
use timbre_core::eval::{self, CorpusTimbre, EvalError, ExperimentConfig, VerifyMode};
use timbre_core::persist::{PersistError, Persist};
use timbre_core::recognition::{self, RecognitionError, SpeakerAudio, SpeakerModel, VerifierModel};
use timbre_core::synth;
use timbre_core::timbre::{self, TimbreError, TimbreExtractor};

use config::PipelineConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Usage(String),
    #[error("corpus {path}: {reason}")]
    Corpus { path: PathBuf, reason: String },
    #[error("{path}: {source}")]
    Audio { path: PathBuf, source: AudioError },
    #[error(transparent)]
    Timbre(#[from] TimbreError),
    #[error(transparent)]
    Recognition(#[from] RecognitionError),
    #[error(transparent)]
    Persist(#[from] PersistError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// Innermost error variant name, e.g. `NoAcceptedFrames` for a recognition
/// error raised inside the CLI.
fn error_name(err: &CliError) -> String {
    let debug = format!("{err:?}");
    let mut name = "";
    let mut rest = debug.as_str();
    loop {
        let end = rest.find(|c: char| !c.is_ascii_alphanumeric() && c != '_').unwrap_or(rest.len());
        let ident = &rest[..end];
        if ident.is_empty() || !ident.starts_with(|c: char| c.is_ascii_uppercase()) {
            break;
        }
        name = ident;
        if ident == "Io" || !rest[end..].starts_with('(') {
            break;
        }
        rest = &rest[end + 1..];
    }
    name.to_string()
}

#[derive(Parser)]
#[command(name = "timbre-id", version, about = "Speaker identification and verification from timbral properties")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Identify,
    Verify,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scoring {
    /// Per-target binary forest
    Binary,
    /// Target column of the multiclass identifier
    OneVsRest,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic timbre dataset (timbre.csv plus one WAV per row)
    SynthData {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 400)]
        rows: usize,
        #[arg(long, default_value_t = 2.0)]
        noise_sd: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic speaker corpus (one directory per speaker)
    SynthCorpus {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        speakers: usize,
        #[arg(long, default_value_t = 10)]
        streams: usize,
        #[arg(long, default_value_t = 2.0)]
        seconds: f64,
        #[arg(long, default_value_t = 16_000)]
        sample_rate: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the seven timbre regressors from a labelled dataset CSV
    TrainTimbre {
        /// Dataset CSV (default: [paths].dataset)
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides [regressor].rng_seed
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a speaker identifier, or a verifier for --target
    Enroll {
        /// Directory with one sub-directory of WAV files per speaker (default: [paths].corpus)
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Trained timbre model (default: [paths].timbre_model)
        #[arg(long)]
        timbre_model: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides [classifier].rng_seed
        #[arg(long)]
        seed: Option<u64>,
        /// Train a target-vs-impostor verifier for this speaker instead
        #[arg(long)]
        target: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Identify the speaker of a WAV file
    Identify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        audio: PathBuf,
        /// Also print every frame's decision
        #[arg(long)]
        per_frame: bool,
    },
    /// Accept or reject a WAV file as the verifier's target (exit 0 accept, 1 reject, 2 error)
    Verify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        audio: PathBuf,
        /// Decision threshold on the mean frame score [default: the model's, 0.5]
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Run an identification or verification experiment and write a report
    Evaluate {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        timbre_model: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "identify")]
        mode: Mode,
        /// Verification scoring
        #[arg(long, value_enum, default_value = "binary")]
        scoring: Scoring,
        /// Population sizes, comma-separated [default: 2 through the corpus size]
        #[arg(long, value_delimiter = ',')]
        populations: Vec<usize>,
        /// Split/sampling seeds, comma-separated [default: [evaluation].seeds, 0,1,2]
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        /// Verification targets, comma-separated [default: every speaker]
        #[arg(long, value_delimiter = ',')]
        targets: Vec<String>,
        /// Fraction of each speaker's streams used for training [default: 0.7]
        #[arg(long)]
        train_fraction: Option<f64>,
        /// Overrides [classifier].rng_seed
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn required(flag: Option<PathBuf>, from_config: &Option<PathBuf>, name: &str) -> Result<PathBuf, CliError> {
    flag.or_else(|| from_config.clone())
        .ok_or_else(|| CliError::Usage(format!("--{name} is required (or set it under [paths])")))
}

fn read_audio(path: &Path) -> Result<audio_io::AudioStream, CliError> {
    audio_io::read_wav(path).map_err(|source| CliError::Audio { path: path.to_path_buf(), source })
}

/// Speakers are the sub-directories of `dir` in name order; their streams
/// are the `.wav` files inside, also in name order.
fn load_corpus(dir: &Path) -> Result<Vec<SpeakerAudio>, CliError> {
    let corpus_err = |reason: String| CliError::Corpus { path: dir.to_path_buf(), reason };
    let mut speakers: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| corpus_err(e.to_string()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    speakers.sort();
    if speakers.is_empty() {
        return Err(corpus_err("no speaker directories".into()));
    }
    speakers
        .iter()
        .map(|spk| {
            let mut wavs: Vec<PathBuf> = std::fs::read_dir(spk)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
                .collect();
            wavs.sort();
            let name = spk.file_name().unwrap_or_default().to_string_lossy().into_owned();
            if wavs.is_empty() {
                return Err(corpus_err(format!("speaker {name} has no WAV files")));
            }
            let streams = wavs.iter().map(|w| read_audio(w)).collect::<Result<_, _>>()?;
            Ok(SpeakerAudio { name, streams })
        })
        .collect()
}

/// The extractor's framing/DSP settings must agree with an explicit config.
fn check_consistent(cfg: &PipelineConfig, explicit: bool, ex: &TimbreExtractor) -> Result<(), CliError> {
    if explicit && (cfg.framing != ex.framing || cfg.dsp != ex.dsp) {
        return Err(CliError::Config(
            "the [framing]/[dsp] settings differ from the ones the timbre model was trained with".into(),
        ));
    }
    Ok(())
}

fn fmt_scores(labels: &[String], scores: &[f64]) -> String {
    labels.iter().zip(scores).map(|(l, s)| format!("{l}={s}")).collect::<Vec<_>>().join(" ")
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::SynthData { seed, rows, noise_sd, out } => {
            let ds = timbre::synth_timbre_dataset(seed, rows, noise_sd);
            let csv = ds.write_dir(&out)?;
            println!("wrote {} rows to {}", ds.len(), csv.display());
        }
        Command::SynthCorpus { seed, speakers, streams, seconds, sample_rate, out } => {
            let corpus = synth::synth_corpus(seed, speakers, streams, seconds, sample_rate)
                .map_err(|source| CliError::Audio { path: out.clone(), source })?;
            for spk in &corpus {
                let dir = out.join(&spk.name);
                std::fs::create_dir_all(&dir)?;
                for (k, s) in spk.streams.iter().enumerate() {
                    let path = dir.join(format!("utt_{k:03}.wav"));
                    audio_io::write_wav_f32(&path, s.samples(), s.sample_rate())
                        .map_err(|source| CliError::Audio { path: path.clone(), source })?;
                }
            }
            println!("wrote {speakers} speakers x {streams} streams to {}", out.display());
        }
        Command::TrainTimbre { dataset, config, seed, out } => {
            let mut cfg = PipelineConfig::load(config.as_deref())?;
            if let Some(s) = seed {
                cfg.regressor.rng_seed = s;
            }
            let dataset = required(dataset, &cfg.paths.dataset, "dataset")?;
            let ds = timbre::load_timbre_dataset(&dataset)?;
            let ex = timbre::train_timbre_regressors(&ds, &cfg.dsp, &cfg.framing, &cfg.regressor)?;
            ex.save(&out)?;
            println!("trained {} regressors on {} rows -> {}", ex.models.len(), ds.len(), out.display());
        }
        Command::Enroll { corpus, timbre_model, config, seed, target, out } => {
            let mut cfg = PipelineConfig::load(config.as_deref())?;
            if let Some(s) = seed {
                cfg.classifier.rng_seed = s;
            }
            let ex = TimbreExtractor::load(required(timbre_model, &cfg.paths.timbre_model, "timbre-model")?)?;
            check_consistent(&cfg, config.is_some(), &ex)?;
            let speakers = load_corpus(&required(corpus, &cfg.paths.corpus, "corpus")?)?;
            match target {
                None => {
                    let model = recognition::train_identifier(&speakers, &ex, &cfg.classifier)?;
                    model.save(&out)?;
                    println!("enrolled {} speakers -> {}", model.labels.len(), out.display());
                }
                Some(target) => {
                    let (own, others): (Vec<&SpeakerAudio>, Vec<&SpeakerAudio>) =
                        speakers.iter().partition(|s| s.name == target);
                    let own = own.first().ok_or_else(|| CliError::Usage(format!("no speaker named {target:?}")))?;
                    let impostors: Vec<_> = others.iter().flat_map(|s| s.streams.iter().cloned()).collect();
                    let model = recognition::train_verifier(&target, &own.streams, &impostors, &ex, &cfg.classifier)?;
                    model.save(&out)?;
                    println!("enrolled verifier for {target} against {} impostors -> {}", others.len(), out.display());
                }
            }
        }
        Command::Identify { model, audio, per_frame } => {
            let model = SpeakerModel::load(&model)?;
            let d = model.identify_stream(&read_audio(&audio)?)?;
            if per_frame {
                for (j, p) in d.frame_probs.iter().enumerate() {
                    let k = timbre_core::forest::argmax(p);
                    println!("frame {j}: {} {}", model.labels[k], fmt_scores(&model.labels, p));
                }
            }
            println!("label: {}", d.label);
            println!("scores: {}", fmt_scores(&model.labels, &d.scores));
            println!("mean_scores: {}", fmt_scores(&model.labels, &d.mean_scores()));
            println!("frames_used: {}", d.frames_used);
        }
        Command::Verify { model, audio, threshold } => {
            let mut model = VerifierModel::load(&model)?;
            if let Some(t) = threshold {
                model = model.with_threshold(t)?;
            }
            let d = model.verify_stream(&read_audio(&audio)?)?;
            println!("{}", if d.accept { "accept" } else { "reject" });
            println!("score: {}", d.score);
            println!("frames_used: {}", d.frames_used);
            return Ok(if d.accept { ExitCode::SUCCESS } else { ExitCode::from(1) });
        }
        Command::Evaluate {
            corpus,
            timbre_model,
            config,
            mode,
            scoring,
            populations,
            seeds,
            targets,
            train_fraction,
            seed,
            out,
        } => {
            let mut cfg = PipelineConfig::load(config.as_deref())?;
            if let Some(s) = seed {
                cfg.classifier.rng_seed = s;
            }
            let ex = TimbreExtractor::load(required(timbre_model, &cfg.paths.timbre_model, "timbre-model")?)?;
            check_consistent(&cfg, config.is_some(), &ex)?;
            let speakers = load_corpus(&required(corpus, &cfg.paths.corpus, "corpus")?)?;
            let ct = CorpusTimbre::from_audio(&ex, &speakers)?;
            let exp = ExperimentConfig {
                train_fraction: train_fraction.unwrap_or(cfg.evaluation.train_fraction),
                seeds: if seeds.is_empty() { cfg.evaluation.seeds.clone() } else { seeds },
                classifier: cfg.classifier,
            };
            let report = match mode {
                Mode::Identify => {
                    let pops = match (populations.is_empty(), cfg.evaluation.populations.is_empty()) {
                        (false, _) => populations,
                        (true, false) => cfg.evaluation.populations.clone(),
                        (true, true) => (2..=ct.n_speakers()).collect(),
                    };
                    eval::run_identification_experiment(&ct, &ex, &pops, &exp)?
                }
                Mode::Verify => {
                    let targets = if targets.is_empty() { ct.labels.clone() } else { targets };
                    let mode = match scoring {
                        Scoring::Binary => VerifyMode::Binary,
                        Scoring::OneVsRest => VerifyMode::OneVsRest,
                    };
                    eval::run_verification_experiment(&ct, &ex, &targets, mode, &exp)?
                }
            };
            let files = eval::emit_report(&report, &out)?;
            for p in &report.populations {
                println!("population {}: stream accuracy {:.4}, frame accuracy {:.4}", p.population, p.stream_accuracy, p.frame_accuracy);
            }
            if let Some(rho) = report.population_spearman {
                println!("spearman(population, accuracy): {rho:.4}");
            }
            for t in &report.targets {
                match (&t.error, t.auc, t.eer) {
                    (None, Some(auc), Some(eer)) => println!(
                        "target {}: AUC {auc:.4}, EER {eer:.4}, stream accuracy {:.4}",
                        t.target,
                        t.stream_accuracy.unwrap_or(f64::NAN)
                    ),
                    (err, _, _) => println!("target {}: not evaluated ({})", t.target, err.as_deref().unwrap_or("no result")),
                }
            }
            println!("report: {}", files.report.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error[{}]: {e}", error_name(&e));
            ExitCode::from(2)
        }
    }
}

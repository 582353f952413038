//! Deterministic synthetic audio: tone + band-limited-noise mixtures, and
//! "speakers" with stable spectral profiles built from them.
//!
//! Everything here is driven by a caller-supplied seed and uses only
//! portable RNG operations, so generated audio is bit-identical across
//! platforms.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::audio_io::{AudioError, AudioStream};
use crate::recognition::SpeakerAudio;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tone {
    pub freq: f64,
    pub amp: f64,
}

/// Gaussian noise through a constant-peak-gain band-pass biquad.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseBand {
    pub center: f64,
    pub q: f64,
    pub amp: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Recipe {
    pub tones: Vec<Tone>,
    pub bands: Vec<NoiseBand>,
}

/// Renders `len` samples of the recipe. Tone phases and noise come from
/// `rng`.
pub fn render<R: Rng>(recipe: &Recipe, len: usize, sample_rate: u32, rng: &mut R) -> Vec<f64> {
    let sr = sample_rate as f64;
    let mut out = vec![0.0; len];
    for tone in &recipe.tones {
        let phase = rng.random_range(0.0..2.0 * PI);
        let step = 2.0 * PI * tone.freq / sr;
        for (i, s) in out.iter_mut().enumerate() {
            *s += tone.amp * (phase + step * i as f64).sin();
        }
    }
    for band in &recipe.bands {
        let w0 = 2.0 * PI * band.center.min(0.45 * sr) / sr;
        let alpha = w0.sin() / (2.0 * band.q);
        let a0 = 1.0 + alpha;
        let (b0, b2) = (alpha / a0, -alpha / a0);
        let (a1, a2) = (-2.0 * w0.cos() / a0, (1.0 - alpha) / a0);
        let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
        // unit-variance white noise through the band-pass; the gain keeps
        // the band's RMS roughly independent of its width
        let gain = band.amp * (2.0 * band.q).sqrt().min(4.0);
        for s in out.iter_mut() {
            let x = gauss(rng);
            let y = b0 * x + b2 * x2 - a1 * y1 - a2 * y2;
            x2 = x1;
            x1 = x;
            y2 = y1;
            y1 = y;
            *s += gain * y;
        }
    }
    out
}

/// Divides by the peak absolute value (no-op for all-zero input).
pub fn peak_normalize(samples: &mut [f64]) {
    let peak = samples.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    if peak > 0.0 {
        samples.iter_mut().for_each(|s| *s /= peak);
    }
}

fn gauss<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

/// Random mixture used for timbre-dataset frames: 1–3 tones spread over
/// 80 Hz–4 kHz and 1–2 noise bands centred in 150 Hz–6 kHz.
pub fn random_recipe<R: Rng>(rng: &mut R) -> Recipe {
    let n_tones = rng.random_range(1..=3u32);
    let n_bands = rng.random_range(1..=2u32);
    Recipe {
        tones: (0..n_tones)
            .map(|_| Tone { freq: log_uniform(rng, 80.0, 4000.0), amp: rng.random_range(0.05..1.0) })
            .collect(),
        bands: (0..n_bands)
            .map(|_| NoiseBand {
                center: log_uniform(rng, 150.0, 6000.0),
                q: rng.random_range(0.7..8.0),
                amp: rng.random_range(0.0..1.0),
            })
            .collect(),
    }
}

/// A synthetic speaker: harmonic voicing with a spectral tilt plus a
/// fricative-like noise band. Each voiced segment jitters the profile a
/// little.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerProfile {
    pub name: String,
    pub f0: f64,
    pub harmonics: usize,
    /// Amplitude of harmonic k is `k^-tilt`.
    pub tilt: f64,
    pub band_center: f64,
    pub band_q: f64,
    /// Noise band amplitude relative to the fundamental.
    pub noise_level: f64,
}

impl SpeakerProfile {
    /// Speaker `index` of a family drawn from `seed`. Profiles are spread
    /// over pitch, brightness and noisiness so neighbouring indices differ.
    pub fn generate(seed: u64, index: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1_000 + index as u64);
        // stratify the spectral character over the index, jitter the rest
        let golden = 0.618_033_988_749_895;
        let u = (index as f64 * golden).fract();
        let v = (index as f64 * golden * golden + 0.37).fract();
        Self {
            name: format!("spk{index:02}"),
            f0: 85.0 + 170.0 * u + rng.random_range(-5.0..5.0),
            harmonics: rng.random_range(6..=14u32) as usize,
            tilt: 0.4 + 1.8 * v,
            band_center: log_uniform(&mut rng, 600.0, 6000.0),
            band_q: rng.random_range(1.0..4.0),
            noise_level: 0.05 + 1.2 * ((u + v) / 2.0).fract(),
        }
    }

    fn segment_recipe<R: Rng>(&self, rng: &mut R) -> Recipe {
        let f0 = self.f0 * (1.0 + rng.random_range(-0.03..0.03));
        let level = 1.0 + rng.random_range(-0.1..0.1);
        Recipe {
            tones: (1..=self.harmonics)
                .map(|k| Tone { freq: f0 * k as f64, amp: level * (k as f64).powf(-self.tilt) })
                .filter(|t| t.freq < 7_500.0)
                .collect(),
            bands: vec![NoiseBand {
                center: self.band_center * (1.0 + rng.random_range(-0.05..0.05)),
                q: self.band_q,
                amp: self.noise_level * (1.0 + rng.random_range(-0.1..0.1)),
            }],
        }
    }

    /// Renders an utterance of `seconds`: voiced segments of 0.4–1.2 s
    /// separated by 0.05–0.25 s pauses of faint noise. The result is raw
    /// (unscaled) audio.
    pub fn utterance(&self, seed: u64, seconds: f64, sample_rate: u32) -> Result<AudioStream, AudioError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let total = (seconds * sample_rate as f64).round() as usize;
        let sr = sample_rate as f64;
        let mut out = Vec::with_capacity(total);
        while out.len() < total {
            let voiced = ((rng.random_range(0.4..1.2) * sr) as usize).min(total - out.len());
            let mut seg = render(&self.segment_recipe(&mut rng), voiced, sample_rate, &mut rng);
            // short raised-cosine edges
            let ramp = (0.01 * sr) as usize;
            for i in 0..ramp.min(voiced / 2) {
                let g = 0.5 - 0.5 * (PI * i as f64 / ramp as f64).cos();
                seg[i] *= g;
                seg[voiced - 1 - i] *= g;
            }
            out.extend(seg);
            let pause = ((rng.random_range(0.05..0.25) * sr) as usize).min(total - out.len());
            out.extend((0..pause).map(|_| 0.002 * gauss(&mut rng)));
        }
        AudioStream::new(out, sample_rate)
    }
}

/// `n_speakers` synthetic speakers, each with `streams_per_speaker`
/// utterances of `seconds_per_stream` seconds.
pub fn synth_corpus(
    seed: u64,
    n_speakers: usize,
    streams_per_speaker: usize,
    seconds_per_stream: f64,
    sample_rate: u32,
) -> Result<Vec<SpeakerAudio>, AudioError> {
    (0..n_speakers)
        .map(|s| {
            let profile = SpeakerProfile::generate(seed, s);
            let streams = (0..streams_per_speaker)
                .map(|k| {
                    let stream_seed = seed ^ ((s as u64) << 32 | k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
                    profile.utterance(stream_seed, seconds_per_stream, sample_rate)
                })
                .collect::<Result<_, _>>()?;
            Ok(SpeakerAudio { name: profile.name, streams })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_is_deterministic() {
        let recipe = random_recipe(&mut ChaCha8Rng::seed_from_u64(3));
        let a = render(&recipe, 1000, 16_000, &mut ChaCha8Rng::seed_from_u64(4));
        let b = render(&recipe, 1000, 16_000, &mut ChaCha8Rng::seed_from_u64(4));
        assert_eq!(a, b);
        assert!(a.iter().all(|s| s.is_finite()));
    }

    #[test]
    fn noise_band_concentrates_energy() {
        let recipe = Recipe { tones: vec![], bands: vec![NoiseBand { center: 2000.0, q: 6.0, amp: 1.0 }] };
        let x = render(&recipe, 4800, 16_000, &mut ChaCha8Rng::seed_from_u64(9));
        let frame = crate::framing::Frame::new(x, 16_000);
        let spec = crate::dsp::stft_magnitude(&frame, &crate::dsp::DspConfig::default()).unwrap();
        let energy: Vec<f64> = spec.intensity.iter().map(|r| r.iter().map(|v| v * v).sum()).collect();
        let peak = crate::forest::argmax(&energy);
        let peak_hz = peak as f64 * 16_000.0 / 512.0;
        assert!((peak_hz - 2000.0).abs() < 300.0, "peak at {peak_hz} Hz");
    }

    #[test]
    fn utterance_has_requested_length_and_pauses() {
        let p = SpeakerProfile::generate(1, 0);
        let s = p.utterance(7, 3.0, 16_000).unwrap();
        assert_eq!(s.len(), 48_000);
        assert!(s.samples().iter().any(|v| v.abs() < 0.01));
        assert_eq!(s, p.utterance(7, 3.0, 16_000).unwrap());
    }

    #[test]
    fn corpus_names_and_sizes() {
        let c = synth_corpus(2, 3, 2, 1.0, 8_000).unwrap();
        assert_eq!(c.iter().map(|s| s.name.as_str()).collect::<Vec<_>>(), ["spk00", "spk01", "spk02"]);
        assert!(c.iter().all(|s| s.streams.len() == 2 && s.streams[0].len() == 8_000));
        assert_ne!(c[0].streams[0], c[0].streams[1]);
    }
}

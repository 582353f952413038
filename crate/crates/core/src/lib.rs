//! Lightweight speaker identification and verification from seven regressed
//! timbral properties of short speech frames.
//!
//! Pipeline, bottom to top: peak-scale the stream ([`audio_io`]), cut it into
//! 0.3 s frames and drop silent ones ([`framing`]), reduce each frame to two
//! weighted spectrogram sums ([`dsp`]), regress seven timbral properties from
//! those ([`timbre`]), and classify the timbral vectors with a random forest
//! ([`recognition`], [`forest`]). [`eval`] holds metrics and experiment
//! harnesses; [`synth`] generates deterministic test audio.

pub mod audio_io;
pub mod dsp;
pub mod eval;
pub mod forest;
pub mod framing;
pub mod persist;
pub mod recognition;
pub mod synth;
pub mod timbre;

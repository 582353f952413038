mod common;

use timbre_core::dsp::{self, DspConfig, Window};
use timbre_core::framing::Frame;

fn chirp(sr: u32, len: usize) -> Frame {
    let t = |i: usize| i as f64 / sr as f64;
    Frame::new((0..len).map(|i| (2.0 * std::f64::consts::PI * (200.0 + 3000.0 * t(i)) * t(i)).sin()).collect(), sr)
}

#[test]
fn stft_matches_direct_dft() {
    let frame = chirp(16_000, 4800);
    let cfg = DspConfig::default();
    let ours = dsp::stft_magnitude(&frame, &cfg).unwrap();
    let reference = common::reference_stft(frame.samples(), cfg.fft_size, cfg.hop_size);
    assert_eq!(ours.rows(), reference.len());
    for (a, b) in ours.intensity.iter().flatten().zip(reference.iter().flatten()) {
        assert!((a - b).abs() <= 1e-9 * (1.0 + b), "{a} vs {b}");
    }
}

#[test]
fn mfcc_matches_reference_at_other_settings() {
    let frame = chirp(8_000, 2400);
    let cfg = DspConfig { fft_size: 256, hop_size: 64, mel_filters: 26, mfcc_coeffs: 20, window: Window::Hann };
    let ours = dsp::mfcc(&frame, &cfg).unwrap();
    let reference = common::reference_mfcc(frame.samples(), 8_000.0, 256, 64, 26, 20);
    for (a, b) in ours.iter().flatten().zip(reference.iter().flatten()) {
        assert!((a - b).abs() <= 1e-4, "{a} vs {b}");
    }
}

#[test]
fn silent_frame_hits_the_log_floor() {
    let frame = Frame::new(vec![0.0; 4800], 16_000);
    let cfg = DspConfig::default();
    let ours = dsp::mfcc(&frame, &cfg).unwrap();
    let reference = common::reference_mfcc(frame.samples(), 16_000.0, 512, 128, 40, 13);
    assert_eq!(ours.len(), reference.len());
    for (a, b) in ours.iter().flatten().zip(reference.iter().flatten()) {
        assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
    }
}

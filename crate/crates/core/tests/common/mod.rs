//! Independent reference implementations used as test oracles. Nothing here
//! calls into the library's numeric code.

#![allow(dead_code)]

use std::f64::consts::PI;

// ---------------------------------------------------------------- DSP

/// Direct O(n²) DFT of a real signal, bins `0..=n/2`, as (re, im).
pub fn naive_rdft(x: &[f64]) -> Vec<(f64, f64)> {
    let n = x.len();
    (0..=n / 2)
        .map(|k| {
            x.iter().enumerate().fold((0.0, 0.0), |(re, im), (t, &v)| {
                let a = -2.0 * PI * (k * t % n) as f64 / n as f64;
                (re + v * a.cos(), im + v * a.sin())
            })
        })
        .collect()
}

pub fn periodic_hann(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()).collect()
}

/// Windowed frames of `x`, no padding.
pub fn windowed_columns(x: &[f64], fft: usize, hop: usize) -> Vec<Vec<f64>> {
    let w = periodic_hann(fft);
    let cols = 1 + (x.len() - fft) / hop;
    (0..cols).map(|j| (0..fft).map(|k| x[j * hop + k] * w[k]).collect()).collect()
}

/// STFT magnitudes as `[bin][column]`.
pub fn reference_stft(x: &[f64], fft: usize, hop: usize) -> Vec<Vec<f64>> {
    let cols: Vec<Vec<f64>> = windowed_columns(x, fft, hop)
        .iter()
        .map(|c| naive_rdft(c).iter().map(|(re, im)| re.hypot(*im)).collect())
        .collect();
    (0..=fft / 2).map(|i| cols.iter().map(|c| c[i]).collect()).collect()
}

/// HTK-style triangular mel filters from 0 Hz to Nyquist with unit peaks.
pub fn reference_mel_bank(n_filters: usize, fft: usize, sr: f64) -> Vec<Vec<f64>> {
    let mel = |hz: f64| 1127.0 * (1.0 + hz / 700.0).ln();
    let inv = |m: f64| 700.0 * ((m / 1127.0).exp() - 1.0);
    let top = mel(sr / 2.0);
    let centers: Vec<f64> = (0..n_filters + 2).map(|k| inv(top * k as f64 / (n_filters + 1) as f64)).collect();
    (0..n_filters)
        .map(|m| {
            (0..=fft / 2)
                .map(|b| {
                    let f = b as f64 * sr / fft as f64;
                    let (l, c, r) = (centers[m], centers[m + 1], centers[m + 2]);
                    if f <= l || f >= r {
                        0.0
                    } else if f <= c {
                        (f - l) / (c - l)
                    } else {
                        (r - f) / (r - c)
                    }
                })
                .collect()
        })
        .collect()
}

/// Signed MFCCs as `[coefficient][column]`: power spectrum, mel energies,
/// natural log floored at 1e-10, orthonormal DCT-II via an explicit matrix.
pub fn reference_mfcc(x: &[f64], sr: f64, fft: usize, hop: usize, n_mel: usize, n_mfcc: usize) -> Vec<Vec<f64>> {
    let bank = reference_mel_bank(n_mel, fft, sr);
    let dct: Vec<Vec<f64>> = (0..n_mfcc)
        .map(|k| {
            let s = if k == 0 { (1.0 / n_mel as f64).sqrt() } else { (2.0 / n_mel as f64).sqrt() };
            (0..n_mel).map(|i| s * (PI / n_mel as f64 * (i as f64 + 0.5) * k as f64).cos()).collect()
        })
        .collect();
    let cols: Vec<Vec<f64>> = windowed_columns(x, fft, hop)
        .iter()
        .map(|c| {
            let power: Vec<f64> = naive_rdft(c).iter().map(|(re, im)| re * re + im * im).collect();
            let logmel: Vec<f64> = bank
                .iter()
                .map(|w| w.iter().zip(&power).map(|(a, b)| a * b).sum::<f64>().max(1e-10).ln())
                .collect();
            dct.iter().map(|row| row.iter().zip(&logmel).map(|(a, b)| a * b).sum()).collect()
        })
        .collect();
    (0..n_mfcc).map(|k| cols.iter().map(|c| c[k]).collect()).collect()
}

// ---------------------------------------------------------------- forest

/// Exact rational `num / den` with non-negative parts.
#[derive(Clone, Copy, Debug)]
struct Ratio {
    num: u128,
    den: u128,
}

impl Ratio {
    fn lt(self, o: Ratio) -> bool {
        self.num * o.den < o.num * self.den
    }
}

/// Σ over children of n_c · gini_c, i.e. `Σ_c (n_c − Σ_k count_k² / n_c)`,
/// kept as an exact fraction.
fn children_impurity(children: &[Vec<u64>]) -> Ratio {
    let mut acc = Ratio { num: 0, den: 1 };
    for counts in children {
        let n: u64 = counts.iter().sum();
        if n == 0 {
            continue;
        }
        let sq: u64 = counts.iter().map(|c| c * c).sum();
        let term = Ratio { num: (n * n - sq) as u128, den: n as u128 };
        acc = Ratio { num: acc.num * term.den + term.num * acc.den, den: acc.den * term.den };
    }
    acc
}

#[derive(Debug)]
pub enum OracleTree {
    Leaf(Vec<u64>),
    Split { feature: usize, threshold: f64, left: Box<OracleTree>, right: Box<OracleTree> },
}

/// Fully grown greedy CART tree by exhaustive search: every feature, every
/// midpoint between consecutive distinct values, impurity compared exactly.
/// Ties prefer the lower feature, then the lower threshold. A node becomes a
/// leaf when it is pure or no split lowers its impurity.
pub fn oracle_tree(x: &[Vec<f64>], y: &[usize], n_classes: usize, idx: &[usize]) -> OracleTree {
    let counts = |ids: &[usize]| {
        let mut c = vec![0u64; n_classes];
        for &i in ids {
            c[y[i]] += 1;
        }
        c
    };
    let here = counts(idx);
    if here.iter().filter(|&&c| c > 0).count() <= 1 || idx.len() < 2 {
        return OracleTree::Leaf(here);
    }
    let parent = children_impurity(std::slice::from_ref(&here));
    let mut best: Option<(Ratio, usize, f64)> = None;
    for f in 0..x[0].len() {
        let mut values: Vec<f64> = idx.iter().map(|&i| x[i][f]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x[i][f] <= t);
            let imp = children_impurity(&[counts(&l), counts(&r)]);
            if !imp.lt(parent) {
                continue;
            }
            let better = match best {
                None => true,
                Some((b, _, _)) => imp.lt(b),
            };
            if better {
                best = Some((imp, f, t));
            }
        }
    }
    match best {
        None => OracleTree::Leaf(here),
        Some((_, feature, threshold)) => {
            let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x[i][feature] <= threshold);
            OracleTree::Split {
                feature,
                threshold,
                left: Box::new(oracle_tree(x, y, n_classes, &l)),
                right: Box::new(oracle_tree(x, y, n_classes, &r)),
            }
        }
    }
}

pub fn oracle_proba(tree: &OracleTree, q: &[f64]) -> Vec<f64> {
    match tree {
        OracleTree::Leaf(c) => {
            let n: u64 = c.iter().sum();
            c.iter().map(|&k| k as f64 / n as f64).collect()
        }
        OracleTree::Split { feature, threshold, left, right } => {
            oracle_proba(if q[*feature] <= *threshold { left } else { right }, q)
        }
    }
}

// ---------------------------------------------------------------- metrics

/// Mann–Whitney U / (n⁺ n⁻): the probability a random positive outscores a
/// random negative, ties counting one half. Brute force over all pairs.
pub fn mann_whitney_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut u, mut pairs) = (0.0, 0u64);
    for (i, &si) in scores.iter().enumerate() {
        if !labels[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] {
                continue;
            }
            pairs += 1;
            if si > sj {
                u += 1.0;
            } else if si == sj {
                u += 0.5;
            }
        }
    }
    u / pairs as f64
}

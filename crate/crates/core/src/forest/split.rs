//! Impurity measures and exhaustive threshold search.

use serde::{Deserialize, Serialize};

/// Regression gains at or below this are treated as "no improvement".
/// Classification compares impurities exactly and needs no tolerance.
pub const MIN_GAIN: f64 = 1e-12;

/// Gini impurity Σ p(i)·(1 − p(i)).
pub fn gini(probs: &[f64]) -> f64 {
    probs.iter().map(|p| p * (1.0 - p)).sum()
}

/// n · Gini(counts) = Σ c·(n − c) / n, from a single rounding of an exact
/// integer ratio. Independent of class order and of uniform count scaling.
fn scaled_gini(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let cross: u128 = counts.iter().map(|&c| c as u128 * (total - c) as u128).sum();
    cross as f64 / total as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Classify,
    Regress,
}

/// Training targets for the samples in `x`, indexed the same way.
#[derive(Debug, Clone, Copy)]
pub enum Targets<'a> {
    Classes { labels: &'a [usize], n_classes: usize },
    Values(&'a [f64]),
}

impl Targets<'_> {
    pub fn task(&self) -> Task {
        match self {
            Targets::Classes { .. } => Task::Classify,
            Targets::Values(_) => Task::Regress,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// Running mean / sum of squared deviations (Welford). Constant inputs keep
/// `m2` at exactly zero.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Moments {
    pub count: usize,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    // adjacent floats can round the midpoint up onto `hi`
    if mid >= hi {
        lo
    } else {
        mid
    }
}

/// Best split of the rows `samples` (indices into `x`, repeats allowed)
/// over `candidate_features`.
///
/// Thresholds are midpoints between consecutive distinct sorted values; a
/// sample goes left when `x[f] <= threshold`. The gain is the decrease in
/// weighted Gini impurity (classification) or weighted variance
/// (regression). Ties go to the lowest feature index, then the lowest
/// threshold. Returns `None` when no split strictly lowers the Gini
/// impurity, or no regression split gains more than [`MIN_GAIN`].
pub fn best_split(
    x: &[Vec<f64>],
    targets: Targets<'_>,
    samples: &[usize],
    candidate_features: &[usize],
) -> Option<Split> {
    if samples.len() < 2 {
        return None;
    }
    let mut features = candidate_features.to_vec();
    features.sort_unstable();
    features.dedup();

    let mut order = samples.to_vec();
    let mut best: Option<(Split, Score)> = None;
    for &feature in &features {
        order.sort_by(|&a, &b| x[a][feature].total_cmp(&x[b][feature]));
        let found = match targets {
            Targets::Classes { labels, n_classes } => {
                sweep_classes(x, labels, n_classes, &order, feature)
            }
            Targets::Values(values) => sweep_values(x, values, &order, feature),
        };
        if let Some((threshold, gain, score)) = found {
            if best.is_none_or(|(_, b)| score.beats(b)) {
                best = Some((Split { feature, threshold, gain }, score));
            }
        }
    }
    best.map(|(s, _)| s)
}

/// Ranking key of a candidate split. Classification keys are exact
/// fractions so equal impurities tie exactly and the documented tie rule
/// applies; regression keys are the floating-point gain.
#[derive(Debug, Clone, Copy)]
enum Score {
    /// Children's scaled impurity `num / den`; lower is better.
    Impurity { num: u128, den: u128 },
    Gain(f64),
}

impl Score {
    fn beats(self, other: Score) -> bool {
        match (self, other) {
            // products stay below u128::MAX for nodes of up to ~4e7 samples
            (Score::Impurity { num: a, den: b }, Score::Impurity { num: c, den: d }) => a * d < c * b,
            (Score::Gain(a), Score::Gain(b)) => a > b,
            _ => unreachable!("one task per search"),
        }
    }
}

fn cross(counts: &[usize], total: usize) -> u128 {
    counts.iter().map(|&c| c as u128 * (total - c) as u128).sum()
}

fn sweep_classes(
    x: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
    order: &[usize],
    feature: usize,
) -> Option<(f64, f64, Score)> {
    let n = order.len();
    let mut right = vec![0usize; n_classes];
    for &i in order {
        right[labels[i]] += 1;
    }
    // parent scaled impurity is cross_p / n
    let cross_p = cross(&right, n);
    let parent = Score::Impurity { num: cross_p, den: n as u128 };
    let mut left = vec![0usize; n_classes];
    let mut best: Option<(f64, f64, Score)> = None;
    for pos in 0..n - 1 {
        let label = labels[order[pos]];
        left[label] += 1;
        right[label] -= 1;
        let (here, next) = (x[order[pos]][feature], x[order[pos + 1]][feature]);
        if here == next {
            continue;
        }
        let (nl, nr) = (pos + 1, n - pos - 1);
        let (cl, cr) = (cross(&left, nl), cross(&right, nr));
        let score = Score::Impurity { num: cl * nr as u128 + cr * nl as u128, den: (nl * nr) as u128 };
        if score.beats(parent) && best.is_none_or(|(_, _, b)| score.beats(b)) {
            let gain = (cross_p as f64 / n as f64 - scaled_gini(&left, nl) - scaled_gini(&right, nr)) / n as f64;
            best = Some((midpoint(here, next), gain, score));
        }
    }
    best
}

fn sweep_values(x: &[Vec<f64>], values: &[f64], order: &[usize], feature: usize) -> Option<(f64, f64, Score)> {
    let n = order.len();
    let mut suffix = vec![Moments::default(); n + 1];
    for pos in (0..n).rev() {
        let mut m = suffix[pos + 1];
        m.push(values[order[pos]]);
        suffix[pos] = m;
    }
    let parent_m2 = suffix[0].m2;
    let mut left = Moments::default();
    let mut best: Option<(f64, f64, Score)> = None;
    for pos in 0..n - 1 {
        left.push(values[order[pos]]);
        let (here, next) = (x[order[pos]][feature], x[order[pos + 1]][feature]);
        if here == next {
            continue;
        }
        let gain = (parent_m2 - left.m2 - suffix[pos + 1].m2) / n as f64;
        if gain > MIN_GAIN && best.is_none_or(|(_, g, _)| gain > g) {
            best = Some((midpoint(here, next), gain, Score::Gain(gain)));
        }
    }
    best
}

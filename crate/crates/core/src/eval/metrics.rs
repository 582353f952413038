use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, tn: u64, fp: u64, fn_: u64) -> Self {
        Self { tp, tn, fp, fn_ }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// Tallies binary decisions against ground truth.
    pub fn from_decisions(decisions: &[bool], truth: &[bool]) -> Self {
        let mut c = Self::default();
        for (&d, &t) in decisions.iter().zip(truth) {
            match (d, t) {
                (true, true) => c.tp += 1,
                (false, false) => c.tn += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }
}

/// (TP + TN) / (TP + TN + FP + FN).
pub fn accuracy(c: &ConfusionCounts) -> Result<f64, EvalError> {
    if c.total() == 0 {
        return Err(EvalError::EmptyCounts);
    }
    Ok((c.tp + c.tn) as f64 / c.total() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// Scores `>= threshold` are called positive. The first point uses +inf,
    /// which serializes as `null`.
    #[serde(with = "open_threshold")]
    pub threshold: f64,
    pub tpr: f64,
    pub fpr: f64,
}

mod open_threshold {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        v.is_finite().then_some(*v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub positives: usize,
    pub negatives: usize,
}

/// Sweeps the threshold over the distinct scores in descending order. Equal
/// scores enter together, so ties produce one diagonal step rather than an
/// optimistic staircase.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<RocCurve, EvalError> {
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(EvalError::SingleClassLabels);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![RocPoint { threshold: f64::INFINITY, tpr: 0.0, fpr: 0.0 }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold,
            tpr: tp as f64 / positives as f64,
            fpr: fp as f64 / negatives as f64,
        });
    }
    Ok(RocCurve { points, positives, negatives })
}

/// Trapezoidal area under the curve.
pub fn auc(curve: &RocCurve) -> f64 {
    curve
        .points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum()
}

/// Error rate where the false-positive rate equals the false-negative rate
/// (`fpr = 1 − tpr`), interpolated linearly between the bracketing points.
pub fn eer(curve: &RocCurve) -> f64 {
    eer_point(curve).0
}

/// `(eer, fpr*, tpr*)` at the interpolated crossing.
pub fn eer_point(curve: &RocCurve) -> (f64, f64, f64) {
    let gap = |p: &RocPoint| p.fpr + p.tpr - 1.0;
    for w in curve.points.windows(2) {
        let (g0, g1) = (gap(&w[0]), gap(&w[1]));
        if g0 <= 0.0 && g1 >= 0.0 {
            if g1 == g0 {
                return (w[0].fpr, w[0].fpr, w[0].tpr);
            }
            let t = -g0 / (g1 - g0);
            let fpr = w[0].fpr + t * (w[1].fpr - w[0].fpr);
            let tpr = w[0].tpr + t * (w[1].tpr - w[0].tpr);
            // report the midpoint of the two error rates; they agree up to
            // rounding
            return ((fpr + (1.0 - tpr)) / 2.0, fpr, tpr);
        }
    }
    // unreachable for well-formed curves, which run from (0,0) to (1,1)
    let last = curve.points.last().expect("curves have points");
    (last.fpr, last.fpr, last.tpr)
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation with average ranks for ties. Zero when either
/// side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        0.0
    } else {
        cov / (vx * vy).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&ConfusionCounts::new(5, 5, 0, 0)).unwrap(), 1.0);
        assert_eq!(accuracy(&ConfusionCounts::new(1, 1, 1, 1)).unwrap(), 0.5);
        assert!(matches!(accuracy(&ConfusionCounts::default()), Err(EvalError::EmptyCounts)));
        let c = ConfusionCounts::from_decisions(&[true, false, true, false], &[true, false, false, true]);
        assert_eq!(c, ConfusionCounts::new(1, 1, 1, 1));
    }

    #[test]
    fn perfect_separation() {
        let c = roc_curve(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false]).unwrap();
        assert!(c.points.iter().any(|p| p.fpr == 0.0 && p.tpr == 1.0));
        assert_eq!(auc(&c), 1.0);
        assert_eq!(eer(&c), 0.0);
    }

    #[test]
    fn all_scores_tied() {
        let c = roc_curve(&[0.5; 6], &[true, false, true, false, false, true]).unwrap();
        assert_eq!(c.points.len(), 2);
        assert_eq!((c.points[0].fpr, c.points[0].tpr), (0.0, 0.0));
        assert_eq!((c.points[1].fpr, c.points[1].tpr), (1.0, 1.0));
        assert_eq!(auc(&c), 0.5);
        assert_eq!(eer(&c), 0.5);
    }

    #[test]
    fn single_class_rejected() {
        assert!(matches!(roc_curve(&[0.1, 0.2], &[true, true]), Err(EvalError::SingleClassLabels)));
    }

    #[test]
    fn random_labels_track_the_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let scores: Vec<f64> = (0..10_000).map(|_| rng.random()).collect();
        let labels: Vec<bool> = (0..10_000).map(|_| rng.random_bool(0.5)).collect();
        let c = roc_curve(&scores, &labels).unwrap();
        let worst = c.points.iter().map(|p| (p.tpr - p.fpr).abs()).fold(0.0, f64::max);
        assert!(worst < 0.05, "max |tpr - fpr| = {worst}");
    }

    #[test]
    fn curve_is_monotone_with_unit_endpoints() {
        let c = roc_curve(&[0.3, 0.1, 0.7, 0.7, 0.2], &[false, true, true, false, true]).unwrap();
        assert!(c.points.windows(2).all(|w| w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr));
        let last = c.points.last().unwrap();
        assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
    }

    #[test]
    fn curve_survives_json() {
        let c = roc_curve(&[0.3, 0.1, 0.7], &[false, true, true]).unwrap();
        let back: RocCurve = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn spearman_basics() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]) - 1.0).abs() < 1e-12);
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[0.5, 0.5, 0.5]), 0.0);
        assert_eq!(ranks(&[3.0, 1.0, 3.0]), vec![2.5, 1.0, 2.5]);
    }
}

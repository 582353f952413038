//! Random forests of greedy CART trees: Gini-split classifiers and
//! variance-split regressors.
//!
//! Every tree draws from its own ChaCha8 stream (`rng_seed`, stream = tree
//! index), so a fitted forest depends only on the data and the config, never
//! on how trees were scheduled across threads.

mod split;
mod tree;

pub use split::{best_split, gini, Split, Targets, Task, MIN_GAIN};
pub use tree::{ClassTree, DecisionTree, Node, ValueTree};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use tree::{grow, GrowParams, LeafPayload};

#[derive(Debug, Error, PartialEq)]
pub enum ForestError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("classification needs at least two distinct classes")]
    SingleClass,
    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{samples} samples but {targets} targets")]
    LengthMismatch { samples: usize, targets: usize },
    #[error("feature matrix contains a non-finite value")]
    NonFiniteInput,
    #[error("invalid forest config: {0}")]
    InvalidConfig(String),
}

/// How many features each node examines before falling back to the rest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeaturesPerSplit {
    /// `sqrt` for classification, `third` for regression.
    Auto,
    /// floor(sqrt(d)), at least 1.
    Sqrt,
    /// floor(d / 3), at least 1.
    Third,
    All,
    Count(usize),
}

impl FeaturesPerSplit {
    pub fn resolve(self, n_features: usize, task: Task) -> usize {
        let k = match (self, task) {
            (FeaturesPerSplit::Auto, Task::Classify) | (FeaturesPerSplit::Sqrt, _) => {
                (n_features as f64).sqrt().floor() as usize
            }
            (FeaturesPerSplit::Auto, Task::Regress) | (FeaturesPerSplit::Third, _) => n_features / 3,
            (FeaturesPerSplit::All, _) => n_features,
            (FeaturesPerSplit::Count(k), _) => k,
        };
        k.clamp(1, n_features.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub features_per_split: FeaturesPerSplit,
    pub bootstrap: bool,
    pub rng_seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            min_samples_split: 2,
            features_per_split: FeaturesPerSplit::Auto,
            bootstrap: true,
            rng_seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<(), ForestError> {
        if self.n_trees == 0 {
            return Err(ForestError::InvalidConfig("n_trees must be at least 1".into()));
        }
        if self.min_samples_split < 2 {
            return Err(ForestError::InvalidConfig("min_samples_split must be at least 2".into()));
        }
        if self.features_per_split == FeaturesPerSplit::Count(0) {
            return Err(ForestError::InvalidConfig("features_per_split count must be positive".into()));
        }
        Ok(())
    }

    fn tree_rng(&self, tree_index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.rng_seed);
        rng.set_stream(tree_index as u64);
        rng
    }
}

fn check_matrix(x: &[Vec<f64>], n_targets: usize) -> Result<usize, ForestError> {
    if x.is_empty() {
        return Err(ForestError::EmptyTrainingSet);
    }
    if x.len() != n_targets {
        return Err(ForestError::LengthMismatch { samples: x.len(), targets: n_targets });
    }
    let d = x[0].len();
    for row in x {
        if row.len() != d {
            return Err(ForestError::DimensionMismatch { expected: d, got: row.len() });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(ForestError::NonFiniteInput);
        }
    }
    Ok(d)
}

fn fit_trees<L: LeafPayload + Send>(
    x: &[Vec<f64>],
    targets: Targets<'_>,
    cfg: &ForestConfig,
) -> Vec<DecisionTree<L>> {
    let n = x.len();
    let params = GrowParams {
        max_depth: cfg.max_depth,
        min_samples_split: cfg.min_samples_split,
        features_per_split: cfg.features_per_split.resolve(x[0].len(), targets.task()),
    };
    (0..cfg.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = cfg.tree_rng(t);
            let samples: Vec<usize> = if cfg.bootstrap {
                (0..n).map(|_| rng.random_range(0..n as u64) as usize).collect()
            } else {
                (0..n).collect()
            };
            grow(x, targets, samples, &params, &mut rng)
        })
        .collect()
}

/// Forest of class-count trees over `n_classes` labels `0..n_classes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub n_features: usize,
    pub n_classes: usize,
    pub config: ForestConfig,
    pub trees: Vec<ClassTree>,
}

/// Fits a classifier. Labels are dense class ids; `n_classes` is
/// `max(label) + 1`.
pub fn fit_classifier(
    x: &[Vec<f64>],
    labels: &[usize],
    cfg: &ForestConfig,
) -> Result<ClassifierModel, ForestError> {
    cfg.validate()?;
    let n_features = check_matrix(x, labels.len())?;
    if labels.iter().all(|&l| l == labels[0]) {
        return Err(ForestError::SingleClass);
    }
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let targets = Targets::Classes { labels, n_classes };
    Ok(ClassifierModel { n_features, n_classes, config: *cfg, trees: fit_trees(x, targets, cfg) })
}

impl ClassifierModel {
    /// Mean over trees of the leaf class proportions.
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>, ForestError> {
        if x.len() != self.n_features {
            return Err(ForestError::DimensionMismatch { expected: self.n_features, got: x.len() });
        }
        let mut probs = vec![0.0; self.n_classes];
        for tree in &self.trees {
            let counts = tree.leaf_for(x);
            let total: u32 = counts.iter().sum();
            for (p, &c) in probs.iter_mut().zip(counts) {
                *p += c as f64 / total as f64;
            }
        }
        let n = self.trees.len() as f64;
        probs.iter_mut().for_each(|p| *p /= n);
        Ok(probs)
    }

    /// Argmax of [`predict_proba`](Self::predict_proba); ties go to the
    /// lowest class id.
    pub fn predict(&self, x: &[f64]) -> Result<usize, ForestError> {
        Ok(argmax(&self.predict_proba(x)?))
    }
}

/// Index of the largest entry, lowest index on ties. Empty input gives 0.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Forest of mean-target trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorModel {
    pub n_features: usize,
    pub target_min: f64,
    pub target_max: f64,
    pub config: ForestConfig,
    pub trees: Vec<ValueTree>,
}

pub fn fit_regressor(
    x: &[Vec<f64>],
    targets: &[f64],
    cfg: &ForestConfig,
) -> Result<RegressorModel, ForestError> {
    cfg.validate()?;
    let n_features = check_matrix(x, targets.len())?;
    if targets.iter().any(|v| !v.is_finite()) {
        return Err(ForestError::NonFiniteInput);
    }
    let target_min = targets.iter().copied().fold(f64::INFINITY, f64::min);
    let target_max = targets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(RegressorModel {
        n_features,
        target_min,
        target_max,
        config: *cfg,
        trees: fit_trees(x, Targets::Values(targets), cfg),
    })
}

impl RegressorModel {
    pub fn predict(&self, x: &[f64]) -> Result<f64, ForestError> {
        if x.len() != self.n_features {
            return Err(ForestError::DimensionMismatch { expected: self.n_features, got: x.len() });
        }
        let sum: f64 = self.trees.iter().map(|t| *t.leaf_for(x)).sum();
        Ok((sum / self.trees.len() as f64).clamp(self.target_min, self.target_max))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_tree() -> ForestConfig {
        ForestConfig {
            n_trees: 1,
            bootstrap: false,
            features_per_split: FeaturesPerSplit::All,
            ..Default::default()
        }
    }

    fn four_points() -> (Vec<Vec<f64>>, Vec<usize>) {
        ([1.0, 2.0, 8.0, 9.0].iter().map(|&a| vec![a]).collect(), vec![0, 0, 1, 1])
    }

    #[test]
    fn single_tree_fits_training_set() {
        let (x, y) = four_points();
        let m = fit_classifier(&x, &y, &single_tree()).unwrap();
        for (row, label) in x.iter().zip(&y) {
            assert_eq!(m.predict(row).unwrap(), *label);
        }
        assert_eq!(m.predict_proba(&[5.1]).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn classifier_errors() {
        let (x, _) = four_points();
        assert_eq!(fit_classifier(&x, &[1, 1, 1, 1], &single_tree()), Err(ForestError::SingleClass));
        assert_eq!(fit_classifier(&[], &[], &single_tree()), Err(ForestError::EmptyTrainingSet));
        let m = fit_classifier(&x, &[0, 0, 1, 1], &single_tree()).unwrap();
        assert_eq!(
            m.predict_proba(&[1.0, 2.0]),
            Err(ForestError::DimensionMismatch { expected: 1, got: 2 })
        );
        assert_eq!(
            fit_classifier(&[vec![f64::NAN], vec![1.0]], &[0, 1], &single_tree()),
            Err(ForestError::NonFiniteInput)
        );
    }

    #[test]
    fn two_disagreeing_trees_average() {
        let a: ClassTree = DecisionTree { nodes: vec![Node::Leaf(vec![3, 0])] };
        let b: ClassTree = DecisionTree { nodes: vec![Node::Leaf(vec![0, 5])] };
        let m = ClassifierModel {
            n_features: 1,
            n_classes: 2,
            config: ForestConfig::default(),
            trees: vec![a, b],
        };
        assert_eq!(m.predict_proba(&[0.0]).unwrap(), vec![0.5, 0.5]);
        assert_eq!(m.predict(&[0.0]).unwrap(), 0);
    }

    #[test]
    fn regressor_examples() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let m = fit_regressor(&x, &[4.25; 20], &ForestConfig { n_trees: 10, ..Default::default() }).unwrap();
        for probe in [-100.0, 3.3, 1e6] {
            assert_eq!(m.predict(&[probe]).unwrap(), 4.25);
        }

        let x: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64 / 10.0]).collect();
        let y: Vec<f64> = x.iter().map(|r| if r[0] < 5.0 { 0.0 } else { 10.0 }).collect();
        let m = fit_regressor(&x, &y, &single_tree()).unwrap();
        assert_eq!(m.predict(&[2.0]).unwrap(), 0.0);
        assert_eq!(m.predict(&[7.0]).unwrap(), 10.0);
        assert_eq!(fit_regressor(&[], &[], &single_tree()), Err(ForestError::EmptyTrainingSet));
    }

    #[test]
    fn seeded_fits_are_identical() {
        let x: Vec<Vec<f64>> = (0..60).map(|i| vec![(i * 37 % 11) as f64, (i * 13 % 7) as f64, i as f64]).collect();
        let y: Vec<usize> = (0..60).map(|i| (i * 7 % 3) as usize).collect();
        let cfg = ForestConfig { n_trees: 25, rng_seed: 99, ..Default::default() };
        let a = fit_classifier(&x, &y, &cfg).unwrap();
        let b = fit_classifier(&x, &y, &cfg).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let c = fit_classifier(&x, &y, &ForestConfig { rng_seed: 100, ..cfg }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn features_per_split_rules() {
        assert_eq!(FeaturesPerSplit::Auto.resolve(7, Task::Classify), 2);
        assert_eq!(FeaturesPerSplit::Auto.resolve(2, Task::Regress), 1);
        assert_eq!(FeaturesPerSplit::Auto.resolve(9, Task::Regress), 3);
        assert_eq!(FeaturesPerSplit::All.resolve(9, Task::Regress), 9);
        assert_eq!(FeaturesPerSplit::Count(50).resolve(4, Task::Classify), 4);
    }

    #[test]
    fn config_validation() {
        assert!(ForestConfig { n_trees: 0, ..Default::default() }.validate().is_err());
        assert!(ForestConfig { min_samples_split: 1, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[0.7, 0.3]), 0);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.0, 1.0, 0.0]), 1);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn dataset() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<usize>)> {
            (4usize..40).prop_flat_map(|n| {
                (
                    prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 2), n),
                    prop::collection::vec(0usize..3, n),
                )
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn probabilities_sum_to_one((x, y) in dataset(), probe in prop::collection::vec(-60.0f64..60.0, 2)) {
                prop_assume!(y.iter().any(|&l| l != y[0]));
                let m = fit_classifier(&x, &y, &ForestConfig { n_trees: 7, ..Default::default() }).unwrap();
                let p = m.predict_proba(&probe).unwrap();
                prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                prop_assert!(p.iter().all(|v| *v >= 0.0));
            }

            #[test]
            fn regression_stays_in_target_range((x, _) in dataset(), seed in 0u64..1000, probe in prop::collection::vec(-60.0f64..60.0, 2)) {
                let y: Vec<f64> = x.iter().map(|r| (r[0] * 3.1 + r[1]).sin() * 40.0).collect();
                let m = fit_regressor(&x, &y, &ForestConfig { n_trees: 5, rng_seed: seed, ..Default::default() }).unwrap();
                let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let v = m.predict(&probe).unwrap();
                prop_assert!(v >= lo && v <= hi);
            }

            #[test]
            fn duplicating_samples_changes_nothing((x, y) in dataset(), probe in prop::collection::vec(-60.0f64..60.0, 2)) {
                prop_assume!(y.iter().any(|&l| l != y[0]));
                let cfg = single_tree();
                let once = fit_classifier(&x, &y, &cfg).unwrap();
                let x2: Vec<Vec<f64>> = x.iter().chain(&x).cloned().collect();
                let y2: Vec<usize> = y.iter().chain(&y).copied().collect();
                let twice = fit_classifier(&x2, &y2, &cfg).unwrap();
                prop_assert_eq!(once.predict_proba(&probe).unwrap(), twice.predict_proba(&probe).unwrap());
            }

            #[test]
            fn monotone_feature_transform_keeps_partition((x, y) in dataset()) {
                prop_assume!(y.iter().any(|&l| l != y[0]));
                let cfg = single_tree();
                let warped: Vec<Vec<f64>> = x.iter().map(|r| vec![r[0].powi(3) + 2.0 * r[0], (r[1] / 10.0).exp()]).collect();
                let a = fit_classifier(&x, &y, &cfg).unwrap();
                let b = fit_classifier(&warped, &y, &cfg).unwrap();
                for (r, w) in x.iter().zip(&warped) {
                    prop_assert_eq!(a.predict_proba(r).unwrap(), b.predict_proba(w).unwrap());
                }
            }

            #[test]
            fn relabeling_permutes_probabilities((x, y) in dataset(), probe in prop::collection::vec(-60.0f64..60.0, 2)) {
                prop_assume!(y.iter().any(|&l| l != y[0]) && y.contains(&0));
                let n_classes = y.iter().max().unwrap() + 1;
                let perm: Vec<usize> = (0..n_classes).rev().collect();
                let cfg = ForestConfig { n_trees: 5, rng_seed: 3, ..Default::default() };
                let a = fit_classifier(&x, &y, &cfg).unwrap();
                let y2: Vec<usize> = y.iter().map(|&l| perm[l]).collect();
                let b = fit_classifier(&x, &y2, &cfg).unwrap();
                let pa = a.predict_proba(&probe).unwrap();
                let pb = b.predict_proba(&probe).unwrap();
                for c in 0..n_classes {
                    prop_assert!((pa[c] - pb[perm[c]]).abs() < 1e-12);
                }
            }
        }
    }
}

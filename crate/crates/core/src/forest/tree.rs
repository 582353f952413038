use rand::Rng;
use serde::{Deserialize, Serialize};

use super::split::{best_split, Moments, Targets};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Node<L> {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf(L),
}

/// Arena-allocated binary tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree<L> {
    pub nodes: Vec<Node<L>>,
}

impl<L> DecisionTree<L> {
    pub fn leaf_for(&self, x: &[f64]) -> &L {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Split { feature, threshold, left, right } => {
                    id = if x[*feature] <= *threshold { *left } else { *right };
                }
                Node::Leaf(payload) => return payload,
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk<L>(t: &DecisionTree<L>, id: usize) -> usize {
            match &t.nodes[id] {
                Node::Split { left, right, .. } => 1 + walk(t, *left).max(walk(t, *right)),
                Node::Leaf(_) => 0,
            }
        }
        walk(self, 0)
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf(_))).count()
    }
}

/// Class-count leaves (classification).
pub type ClassTree = DecisionTree<Vec<u32>>;
/// Mean-target leaves (regression).
pub type ValueTree = DecisionTree<f64>;

pub(crate) struct GrowParams {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub features_per_split: usize,
}

/// Draws the features examined at one node: a uniformly random subset of
/// size `k` first, then the remaining features in random order.
fn feature_order<R: Rng>(n_features: usize, k: usize, rng: &mut R) -> (Vec<usize>, Vec<usize>) {
    let mut all: Vec<usize> = (0..n_features).collect();
    for i in 0..n_features.saturating_sub(1) {
        let j = i + rng.random_range(0..(n_features - i) as u64) as usize;
        all.swap(i, j);
    }
    let rest = all.split_off(k.min(n_features));
    (all, rest)
}

fn is_pure(targets: Targets<'_>, samples: &[usize]) -> bool {
    match targets {
        Targets::Classes { labels, .. } => samples.iter().all(|&i| labels[i] == labels[samples[0]]),
        Targets::Values(values) => {
            let mut m = Moments::default();
            samples.iter().for_each(|&i| m.push(values[i]));
            m.m2 == 0.0
        }
    }
}

pub(crate) trait LeafPayload: Sized {
    fn from_samples(targets: Targets<'_>, samples: &[usize]) -> Self;
}

impl LeafPayload for Vec<u32> {
    fn from_samples(targets: Targets<'_>, samples: &[usize]) -> Self {
        let Targets::Classes { labels, n_classes } = targets else {
            unreachable!("class leaves need class targets")
        };
        let mut counts = vec![0u32; n_classes];
        samples.iter().for_each(|&i| counts[labels[i]] += 1);
        counts
    }
}

impl LeafPayload for f64 {
    fn from_samples(targets: Targets<'_>, samples: &[usize]) -> Self {
        let Targets::Values(values) = targets else {
            unreachable!("value leaves need real targets")
        };
        let mut m = Moments::default();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &i in samples {
            m.push(values[i]);
            lo = lo.min(values[i]);
            hi = hi.max(values[i]);
        }
        m.mean.clamp(lo, hi)
    }
}

/// Greedy top-down growth. Nodes are numbered in depth-first, left-first
/// order so identical inputs always produce identical arenas.
pub(crate) fn grow<L: LeafPayload, R: Rng>(
    x: &[Vec<f64>],
    targets: Targets<'_>,
    samples: Vec<usize>,
    params: &GrowParams,
    rng: &mut R,
) -> DecisionTree<L> {
    let n_features = x.first().map_or(0, Vec::len);
    let mut nodes: Vec<Option<Node<L>>> = vec![None];
    // (node id, depth, samples)
    let mut stack = vec![(0usize, 0usize, samples)];

    while let Some((id, depth, samples)) = stack.pop() {
        let can_split = samples.len() >= params.min_samples_split
            && params.max_depth.is_none_or(|d| depth < d)
            && !is_pure(targets, &samples);
        let split = if can_split {
            let (first, rest) = feature_order(n_features, params.features_per_split, rng);
            best_split(x, targets, &samples, &first)
                .or_else(|| if rest.is_empty() { None } else { best_split(x, targets, &samples, &rest) })
        } else {
            None
        };

        match split {
            Some(s) => {
                let (left_samples, right_samples): (Vec<usize>, Vec<usize>) =
                    samples.iter().partition(|&&i| x[i][s.feature] <= s.threshold);
                let left = nodes.len();
                let right = left + 1;
                nodes.push(None);
                nodes.push(None);
                nodes[id] = Some(Node::Split { feature: s.feature, threshold: s.threshold, left, right });
                // right pushed first so the left subtree is expanded first
                stack.push((right, depth + 1, right_samples));
                stack.push((left, depth + 1, left_samples));
            }
            None => nodes[id] = Some(Node::Leaf(L::from_samples(targets, &samples))),
        }
    }

    DecisionTree { nodes: nodes.into_iter().map(|n| n.expect("every node is filled")).collect() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(n_features: usize) -> GrowParams {
        GrowParams { max_depth: None, min_samples_split: 2, features_per_split: n_features }
    }

    #[test]
    fn shatters_separable_set() {
        let x: Vec<Vec<f64>> = [1.0, 2.0, 8.0, 9.0].iter().map(|&a| vec![a]).collect();
        let labels = [0, 0, 1, 1];
        let t = Targets::Classes { labels: &labels, n_classes: 2 };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let tree: ClassTree = grow(&x, t, vec![0, 1, 2, 3], &params(1), &mut rng);
        assert_eq!(tree.nodes.len(), 3);
        assert_eq!(tree.leaf_for(&[5.1]), &vec![0, 2]);
        assert_eq!(tree.leaf_for(&[4.9]), &vec![2, 0]);
        assert_eq!(tree.depth(), 1);
    }

    #[test]
    fn max_depth_limits_growth() {
        let x: Vec<Vec<f64>> = (0..16).map(|i| vec![i as f64]).collect();
        let labels: Vec<usize> = (0..16).map(|i| i % 2).collect();
        let t = Targets::Classes { labels: &labels, n_classes: 2 };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = GrowParams { max_depth: Some(2), ..params(1) };
        let tree: ClassTree = grow(&x, t, (0..16).collect(), &p, &mut rng);
        assert!(tree.depth() <= 2);
        for n in &tree.nodes {
            if let Node::Leaf(c) = n {
                assert!(c.iter().sum::<u32>() > 0);
            }
        }
    }

    #[test]
    fn falls_back_to_unsampled_features() {
        // feature 0 is constant, so a one-feature draw that picks it must
        // retry with feature 1
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![3.0, i as f64]).collect();
        let values = [0.0, 0.0, 0.0, 5.0, 5.0, 5.0];
        for seed in 0..8 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = GrowParams { features_per_split: 1, ..params(2) };
            let tree: ValueTree = grow(&x, Targets::Values(&values), (0..6).collect(), &p, &mut rng);
            assert_eq!(*tree.leaf_for(&[3.0, 1.0]), 0.0);
            assert_eq!(*tree.leaf_for(&[3.0, 4.0]), 5.0);
        }
    }
}

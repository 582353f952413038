mod common;

use timbre_core::forest::{fit_classifier, FeaturesPerSplit, ForestConfig};

fn single_tree() -> ForestConfig {
    ForestConfig { n_trees: 1, bootstrap: false, features_per_split: FeaturesPerSplit::All, ..Default::default() }
}

fn assert_matches_oracle(x: &[Vec<f64>], y: &[usize], probes: &[Vec<f64>]) {
    let n_classes = y.iter().max().unwrap() + 1;
    let model = fit_classifier(x, y, &single_tree()).unwrap();
    let idx: Vec<usize> = (0..x.len()).collect();
    let tree = common::oracle_tree(x, y, n_classes, &idx);
    for q in probes.iter().chain(x) {
        assert_eq!(model.predict_proba(q).unwrap(), common::oracle_proba(&tree, q), "probe {q:?}");
    }
}

#[test]
fn separable_four_points() {
    let x: Vec<Vec<f64>> = [1.0, 2.0, 8.0, 9.0].iter().map(|&v| vec![v]).collect();
    assert_matches_oracle(&x, &[0, 0, 1, 1], &[vec![5.1], vec![4.9], vec![-3.0]]);
    let model = fit_classifier(&x, &[0, 0, 1, 1], &single_tree()).unwrap();
    assert_eq!(model.predict_proba(&[5.1]).unwrap(), vec![0.0, 1.0]);
}

/// Two splits whose impurities are equal as fractions but differ after
/// floating-point rounding; the lower feature must win.
#[test]
fn exact_impurity_ties_follow_the_tie_rule() {
    let x = vec![
        vec![1.0, 0.0],
        vec![2.0, 0.0],
        vec![0.0, 2.0],
        vec![2.0, 1.0],
        vec![0.0, 2.0],
        vec![2.0, 0.0],
        vec![0.0, 2.0],
    ];
    let probes: Vec<Vec<f64>> = [0.0, 0.5, 1.0, 1.5, 2.0, 3.0]
        .iter()
        .flat_map(|&a| [0.0, 0.5, 1.0, 1.5, 2.0].map(|b| vec![a, b]))
        .collect();
    assert_matches_oracle(&x, &[2, 1, 0, 0, 1, 1, 2], &probes);
}

#[test]
fn duplicated_points_with_conflicting_labels() {
    let x = vec![vec![1.0], vec![1.0], vec![1.0], vec![3.0]];
    assert_matches_oracle(&x, &[0, 1, 1, 0], &[vec![2.0]]);
    let model = fit_classifier(&x, &[0, 1, 1, 0], &single_tree()).unwrap();
    let p = model.predict_proba(&[1.0]).unwrap();
    assert!((p[1] - 2.0 / 3.0).abs() < 1e-15);
}

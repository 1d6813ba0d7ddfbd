mod oracles;

use oracles::{classes, exhaustive_root, random_dataset, traverse};
use rand::Rng;
use wavemat_core::forest::{self, ForestParams, TreeNode};
use wavemat_core::rng;

#[test]
fn root_split_equals_exhaustive_gini_search() {
    for seed in 0..20 {
        let (rows, labels, k) = random_dataset(seed);
        let d = rows[0].len();
        let params = ForestParams {
            n_trees: 1,
            max_depth: 1,
            features_per_node: d,
            bootstrap: false,
            seed,
            ..ForestParams::default()
        };
        let f = forest::train_on_rows(&rows, &labels, &classes(k), &params).unwrap();
        let root = &f.trees()[0].nodes()[0];
        match (exhaustive_root(&rows, &labels, k), root) {
            (None, TreeNode::Leaf { .. }) => {}
            (Some((ef, et)), TreeNode::Internal { feature, threshold, .. }) => {
                assert_eq!((ef, et), (*feature, *threshold), "seed {seed}");
            }
            (e, r) => panic!("seed {seed}: oracle {e:?} vs tree {r:?}"),
        }
    }
}


#[test]
fn predictions_equal_traversal_oracle() {
    for seed in 0..20 {
        let (rows, labels, k) = random_dataset(100 + seed);
        let params = ForestParams {
            n_trees: 7,
            features_per_node: 3,
            seed,
            ..ForestParams::default()
        };
        let f = forest::train_on_rows(&rows, &labels, &classes(k), &params).unwrap();
        let mut r = rng::stream(seed, &[9]);
        for _ in 0..40 {
            let x: Vec<f64> = (0..rows[0].len()).map(|_| r.random_range(-1.0..11.0)).collect();
            assert_eq!(f.predict(&x), traverse(&f, &x));
        }
        for x in &rows {
            assert_eq!(f.predict(x), traverse(&f, x));
        }
    }
}

#[test]
fn memorises_separable_training_data() {
    let (rows, labels, k) = random_dataset(555);
    // make rows unique so the labels are separable
    let rows: Vec<Vec<f64>> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut r = r.clone();
            r.push(i as f64);
            r
        })
        .collect();
    let params = ForestParams {
        n_trees: 5,
        features_per_node: rows[0].len(),
        bootstrap: false,
        ..ForestParams::default()
    };
    let f = forest::train_on_rows(&rows, &labels, &classes(k), &params).unwrap();
    assert_eq!(f.predict_all(&rows), labels);
}

#[test]
fn importance_sums_to_one_and_is_deterministic() {
    let (rows, labels, k) = random_dataset(77);
    let params = ForestParams { n_trees: 20, features_per_node: 2, seed: 4, ..ForestParams::default() };
    let a = forest::train_on_rows(&rows, &labels, &classes(k), &params).unwrap();
    let b = forest::train_on_rows(&rows, &labels, &classes(k), &params).unwrap();
    assert_eq!(a, b);
    let imp = forest::feature_importance(&a).unwrap();
    assert_eq!(imp.len(), rows[0].len());
    assert!((imp.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    assert!(imp.iter().all(|v| *v >= 0.0));
}

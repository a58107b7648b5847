use landsense_core::forest::{train_forest_on, FeaturesPerSplit, FeatureRule, ForestModel, ForestParams, Node, TrainingSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Two noisy clusters separated along the diagonal of a 6-feature space.
fn separable(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<u32>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = (i % 2) as u32;
        let centre = if class == 0 { -100.0 } else { -90.0 };
        rows.push((0..6).map(|_| centre + rng.random_range(-8.0..8.0)).collect());
        labels.push(class * 11);
    }
    (rows, labels)
}

fn accuracy(model: &ForestModel, rows: &[Vec<f64>], labels: &[u32]) -> f64 {
    let preds = model.predict_all(rows).unwrap();
    preds.iter().zip(labels).filter(|(p, t)| p == t).count() as f64 / labels.len() as f64
}

#[test]
fn ensemble_is_not_worse_than_one_tree() {
    let (rows, labels) = separable(600, 1);
    let (val_rows, val_labels) = separable(2000, 2);
    let data = TrainingSet::new(&rows, &labels).unwrap();
    let one = train_forest_on(&data, &ForestParams { n_trees: 1, seed: 3, ..Default::default() }).unwrap();
    let many = train_forest_on(&data, &ForestParams { n_trees: 100, seed: 3, ..Default::default() }).unwrap();
    let (a1, a100) = (accuracy(&one, &val_rows, &val_labels), accuracy(&many, &val_rows, &val_labels));
    assert!(a100 >= a1 - 0.02, "100 trees {a100} vs one tree {a1}");
}

#[test]
fn permuting_features_and_split_indices_keeps_predictions() {
    let (rows, labels) = separable(300, 4);
    let data = TrainingSet::new(&rows, &labels).unwrap();
    let model = train_forest_on(&data, &ForestParams { n_trees: 15, seed: 9, ..Default::default() }).unwrap();
    // New column j holds old column perm[j].
    let perm = [3usize, 5, 0, 4, 1, 2];
    let mut inverse = [0usize; 6];
    for (j, &old) in perm.iter().enumerate() {
        inverse[old] = j;
    }
    let mut permuted = model.clone();
    for tree in &mut permuted.trees {
        for node in &mut tree.nodes {
            if let Node::Split { feature, .. } = node {
                *feature = inverse[*feature];
            }
        }
    }
    let (probe, _) = separable(500, 5);
    for row in &probe {
        let moved: Vec<f64> = perm.iter().map(|&old| row[old]).collect();
        assert_eq!(model.predict(row).unwrap(), permuted.predict(&moved).unwrap());
    }
}

#[test]
fn training_ignores_thread_count() {
    let (rows, labels) = separable(400, 6);
    let data = TrainingSet::new(&rows, &labels).unwrap();
    let params = ForestParams { n_trees: 12, seed: 21, ..Default::default() };
    let train_with = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| train_forest_on(&data, &params).unwrap().to_bytes().unwrap())
    };
    assert_eq!(train_with(1), train_with(3));
}

#[test]
fn vote_fractions_are_whole_tree_counts() {
    let (rows, labels) = separable(200, 7);
    let data = TrainingSet::new(&rows, &labels).unwrap();
    let params = ForestParams {
        n_trees: 7,
        seed: 2,
        max_depth: Some(2),
        features_per_split: FeaturesPerSplit::Rule(FeatureRule::All),
        ..Default::default()
    };
    let model = train_forest_on(&data, &params).unwrap();
    let (probe, _) = separable(300, 8);
    for row in &probe {
        let p = model.predict(row).unwrap();
        assert_eq!(p.vote_counts.values().sum::<usize>(), 7);
        let total: f64 = p.votes.values().sum();
        assert!((total - 1.0).abs() < 1e-12);
        for (class, &count) in &p.vote_counts {
            assert_eq!(p.votes[class], count as f64 / 7.0);
        }
    }
}

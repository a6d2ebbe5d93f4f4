//! Fits a random forest on a toy problem, scores it and round-trips it
//! through JSON.
//!
//! Run with `cargo run --release --example random_forest`.

use ivnowcast::eval::auc;
use ivnowcast::{fit_forest, Dataset, Forest, ForestConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut draw = |n: usize| -> (Vec<Vec<f64>>, Vec<u8>) {
        (0..n)
            .map(|_| {
                let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
                let p = 1.0 / (1.0 + (-3.0 * (x[0] - 0.5 * x[1])).exp());
                let y = u8::from(rng.random::<f64>() < p);
                (x, y)
            })
            .unzip()
    };
    let (train_x, train_y) = draw(600);
    let (test_x, test_y) = draw(300);

    let config = ForestConfig { n_trees: 200, max_depth: 6, min_samples_split: 10, min_samples_leaf: 3, ..Default::default() };
    let forest = fit_forest(&Dataset::from_rows(&train_x, &train_y).unwrap(), &config).unwrap();
    let scores = forest.predict_many(&test_x).unwrap();
    println!("{}: test AUC {:.4}", config.label(), auc(&scores, &test_y).unwrap());

    let restored = Forest::from_json(&forest.to_json().unwrap()).unwrap();
    assert_eq!(restored, forest);
    println!("JSON round trip preserved all {} trees", restored.trees.len());
}

//! Feature matrices for all seven data-source scenarios of one stock.
//!
//! Run with `cargo run --example feature_matrix`.

use ivnowcast::synth::generate;
use ivnowcast::{ScenarioId, SyntheticSpec};

fn main() {
    let bundle = generate(&SyntheticSpec { n_stocks: 1, n_days: 60, ..Default::default() }).unwrap();
    let stock = &bundle.stock_data().unwrap()[0];
    for sc in ScenarioId::all() {
        let m = stock.matrix(sc).unwrap();
        let names: Vec<&str> = m.columns.iter().map(|c| c.name()).collect();
        println!("{sc} ({}): {} rows x {} features", sc.label(), m.n_rows(), m.n_features());
        println!("    {}", names.join(", "));
    }
    let m = stock.matrix(ScenarioId::new(3).unwrap()).unwrap();
    println!("\nfirst rows of S3:");
    let mut buf = Vec::new();
    m.write_csv(&mut buf).unwrap();
    for line in String::from_utf8(buf).unwrap().lines().take(6) {
        println!("{line}");
    }
}

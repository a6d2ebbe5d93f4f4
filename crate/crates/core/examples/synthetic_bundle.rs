//! Generates a synthetic bundle on disk, ready for `ivnowcast backtest`.
//!
//! Run with `cargo run --example synthetic_bundle -- [DIR]`.

use std::path::PathBuf;

use ivnowcast::synth::generate;
use ivnowcast::SyntheticSpec;

fn main() {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("ivnowcast-demo"));
    let spec = SyntheticSpec { n_stocks: 4, n_days: 800, with_chains: true, ..Default::default() };
    let bundle = generate(&spec).unwrap();
    for s in &bundle.stocks {
        let tweets = s.tweets.len() as f64 / spec.n_days as f64;
        println!(
            "{} {:<24} attention {:.2}  liquidity {:>12.0}  tweets/day {:.1}",
            s.symbol, s.sector, s.attention, s.liquidity, tweets
        );
    }
    bundle.write(&dir).unwrap();
    println!("wrote {}; try: ivnowcast --config {}/config.toml backtest", dir.display(), dir.display());
}

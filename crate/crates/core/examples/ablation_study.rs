//! Scenario ablation on synthetic stocks: forests versus the stratified
//! dummy, per scenario and per sector.
//!
//! Run with `cargo run --release --example ablation_study`.

use ivnowcast::eval::{run_ablation, AblationSettings, PlanParams};
use ivnowcast::synth::generate;
use ivnowcast::{ForestConfig, ScenarioId, SyntheticSpec};

fn main() {
    let bundle = generate(&SyntheticSpec { n_stocks: 3, n_days: 700, ..Default::default() }).unwrap();
    let stocks = bundle.stock_data().unwrap();
    let settings = AblationSettings {
        scenarios: ScenarioId::all(),
        grid: ForestConfig::grid_from(&[4, 8], &[10], &[3], 50, 42),
        plan: PlanParams::default(),
        seed: 42,
    };
    let report = run_ablation(&stocks, &settings).unwrap();
    let show = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.3}"));
    for s in report.scenario_summary() {
        println!(
            "{} {:<40} AUC {}  dummy {}  improvement {}",
            s.scenario,
            s.sources,
            show(s.median_auc),
            show(s.median_dummy_auc),
            show(s.median_improvement)
        );
    }
    println!();
    for row in report.sector_improvements(ScenarioId::new(7).unwrap()) {
        println!("{:<24} {}  improvement {}", row.sector, row.symbol, show(row.improvement));
    }
}

//! Expanding-window walk-forward plans.
//!
//! Run with `cargo run --example walk_forward`.

use ivnowcast::eval::walkforward::expected_fold_count;
use ivnowcast::eval::{make_plan, PlanParams};

fn main() {
    for n in [600, 1000, 1258] {
        let plan = make_plan(n, PlanParams::default()).unwrap();
        println!("{n} days -> {} folds (closed form {})", plan.folds.len(), expected_fold_count(n, plan.params));
        for f in plan.folds.iter().take(2).chain(plan.folds.last()) {
            println!("    fold {:>2}: train {:?}  test {:?}", f.index, f.train, f.test);
        }
    }
}

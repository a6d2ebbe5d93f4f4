use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::EvalError;

pub const INITIAL_TRAIN: usize = 504;
pub const TEST_WINDOW: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanParams {
    pub initial_train: usize,
    pub test_window: usize,
    pub step: usize,
}

impl Default for PlanParams {
    fn default() -> Self {
        Self { initial_train: INITIAL_TRAIN, test_window: TEST_WINDOW, step: TEST_WINDOW }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub index: usize,
    pub train: Range<usize>,
    pub test: Range<usize>,
}

/// Expanding-window train/test splits over `n_days` temporally ordered rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkForwardPlan {
    pub n_days: usize,
    pub params: PlanParams,
    pub folds: Vec<Fold>,
}

/// Fold `i` trains on `[0, initial_train + i·step)` and tests on the next
/// `test_window` days, truncated at the end of the data. A final partial
/// fold is kept when it has at least one test day.
pub fn make_plan(n_days: usize, params: PlanParams) -> Result<WalkForwardPlan, EvalError> {
    let PlanParams { initial_train, test_window, step } = params;
    if initial_train == 0 || test_window == 0 || step == 0 {
        return Err(EvalError::InvalidPlan(format!(
            "initial_train, test_window and step must all be positive (got {initial_train}, {test_window}, {step})"
        )));
    }
    if n_days <= initial_train {
        return Err(EvalError::NotEnoughData { n_days, initial_train });
    }
    let folds = (0..)
        .map(|i| initial_train + i * step)
        .take_while(|&start| start < n_days)
        .enumerate()
        .map(|(index, start)| Fold {
            index,
            train: 0..start,
            test: start..(start + test_window).min(n_days),
        })
        .collect();
    let plan = WalkForwardPlan { n_days, params, folds };
    plan.check_no_leakage()?;
    Ok(plan)
}

/// Closed-form fold count: ⌈(n − t) / step⌉.
pub fn expected_fold_count(n_days: usize, params: PlanParams) -> usize {
    if n_days <= params.initial_train {
        return 0;
    }
    (n_days - params.initial_train).div_ceil(params.step)
}

impl WalkForwardPlan {
    pub fn check_no_leakage(&self) -> Result<(), EvalError> {
        for f in &self.folds {
            if f.train.is_empty() || f.test.is_empty() || f.train.end > f.test.start || f.test.end > self.n_days {
                return Err(EvalError::InvalidPlan(format!("fold {} leaks or is empty", f.index)));
            }
        }
        Ok(())
    }

    /// Distinct test days covered by the plan, in order.
    pub fn test_days(&self) -> Vec<usize> {
        let mut days: Vec<usize> = self.folds.iter().flat_map(|f| f.test.clone()).collect();
        days.sort_unstable();
        days.dedup();
        days
    }
}

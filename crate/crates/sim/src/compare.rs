//! Estimator comparisons under common random numbers: the same model, the
//! same seeds, the same observation streams, different update rules.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::runner::{run_monte_carlo, ComponentCurve, RunResult};
use crate::scenario::ScenarioConfig;

/// Per-component error curves for every estimator readout, aligned on the
/// same log points and random streams.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonTable {
    pub log_points: Vec<u64>,
    pub components: Vec<usize>,
    pub curves: Vec<ComponentCurve>,
}

impl ComparisonTable {
    pub fn curve(&self, component: usize, label: &str) -> Option<&ComponentCurve> {
        self.curves
            .iter()
            .find(|c| c.component == component && c.label == label)
    }

    /// Error at the horizon for one readout.
    pub fn final_error(&self, component: usize, label: &str) -> Option<f64> {
        self.curve(component, label)
            .and_then(|c| c.values.last().copied())
    }
}

fn same_experiment(a: &ScenarioConfig, b: &ScenarioConfig) -> Result<()> {
    let mut diffs = Vec::new();
    if a.model != b.model {
        diffs.push("model");
    }
    if a.schedule != b.schedule {
        diffs.push("schedule");
    }
    if a.trials != b.trials {
        diffs.push("trials");
    }
    if a.horizon != b.horizon {
        diffs.push("horizon");
    }
    if a.seed != b.seed {
        diffs.push("seed");
    }
    if a.tracked_components != b.tracked_components {
        diffs.push("tracked_components");
    }
    if a.zero_noise != b.zero_noise || a.init != b.init {
        diffs.push("run mode");
    }
    if diffs.is_empty() {
        Ok(())
    } else {
        Err(Error::ComparisonMismatch(diffs.join(", ")))
    }
}

/// Run each configuration (they may differ only in estimator kind) and
/// collect the tracked-component curves into one table. Observation streams
/// depend only on (seed, trial), so the estimators see identical data.
pub fn compare_estimators(configs: &[ScenarioConfig]) -> Result<(ComparisonTable, Vec<RunResult>)> {
    let first = configs
        .first()
        .ok_or_else(|| Error::InvalidConfig("no configurations to compare".into()))?;
    if first.tracked_components.is_empty() {
        return Err(Error::InvalidConfig(
            "comparison needs tracked_components".into(),
        ));
    }
    for other in &configs[1..] {
        same_experiment(first, other)?;
    }

    let mut curves = Vec::new();
    let mut results = Vec::new();
    let mut log_points = Vec::new();
    for config in configs {
        let result = run_monte_carlo(config)?;
        if log_points.is_empty() {
            log_points = result.log_points.clone();
        }
        curves.extend(result.component_curves.clone());
        results.push(result);
    }
    Ok((
        ComparisonTable {
            log_points,
            components: first.tracked_components.clone(),
            curves,
        },
        results,
    ))
}

//! File emission: trial-averaged error curves as CSV and the structured run
//! report as JSON. Numeric formatting uses the shortest round-trip
//! representation, so identical runs produce identical bytes.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::compare::ComparisonTable;
use crate::error::Result;
use crate::runner::RunResult;
use crate::scenario::ScenarioConfig;

/// `errors.csv`: one row per (log point, agent) with the trial-averaged
/// normalized error. Agents are 1-based.
pub fn write_errors_csv<W: Write>(out: &mut W, result: &RunResult) -> Result<()> {
    writeln!(out, "t,agent,normalized_error")?;
    for (p, &t) in result.log_points.iter().enumerate() {
        for (agent, err) in result.mean_normalized_errors[p].iter().enumerate() {
            writeln!(out, "{},{},{}", t, agent + 1, err)?;
        }
    }
    Ok(())
}

/// `comparison.csv`: one row per (log point, component, readout label).
pub fn write_comparison_csv<W: Write>(out: &mut W, table: &ComparisonTable) -> Result<()> {
    writeln!(out, "t,component,estimator,abs_error")?;
    for curve in &table.curves {
        for (p, &t) in table.log_points.iter().enumerate() {
            writeln!(out, "{},{},{},{}", t, curve.component, curve.label, curve.values[p])?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct Report<'a> {
    config: &'a ScenarioConfig,
    result: &'a RunResult,
    wall_time_s: f64,
}

/// `report.json`: configuration, checks, and aggregated results. Wall time
/// is the only non-reproducible field and sits at the top level.
pub fn write_report_json<W: Write>(
    out: &mut W,
    config: &ScenarioConfig,
    result: &RunResult,
) -> Result<()> {
    let report = Report {
        config,
        result,
        wall_time_s: result.wall_time_s,
    };
    serde_json::to_writer_pretty(&mut *out, &report)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn write_run_outputs(dir: &Path, config: &ScenarioConfig, result: &RunResult) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut errors = std::fs::File::create(dir.join("errors.csv"))?;
    write_errors_csv(&mut errors, result)?;
    let mut report = std::fs::File::create(dir.join("report.json"))?;
    write_report_json(&mut report, config, result)?;
    if let Some(trajectories) = &result.trajectories {
        let mut file = std::fs::File::create(dir.join("trajectories.csv"))?;
        writeln!(file, "trial,t,agent,component,estimate")?;
        let model = config.resolve_model()?;
        for (trial, states) in trajectories.iter().enumerate() {
            for state in states {
                cirfe_core::estimator::write_trajectory_rows(
                    &mut file,
                    &model,
                    trial as u64,
                    state,
                )?;
            }
        }
    }
    Ok(())
}

//! Pre-run model validation: assembles every executable assumption check
//! into one serializable report.

use cirfe_core::sensing::{NetworkModel, StructuralReport, SubspaceEllipticity};
use serde::Serialize;

use crate::error::Result;
use crate::scenario::ScenarioConfig;

#[derive(Debug, Clone, Serialize)]
pub struct ObservabilitySummary {
    pub full_rank: bool,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConnectivitySummary {
    pub lambda2: f64,
    pub connected: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GainSummary {
    pub gain: f64,
    /// Smallest gain meeting the sufficient condition, when the ellipticity
    /// constant is positive.
    pub floor: Option<f64>,
    pub meets_floor: Option<bool>,
    pub enforced: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub node_count: usize,
    pub global_observability: ObservabilitySummary,
    pub interest_consistency: bool,
    pub mean_connectivity: ConnectivitySummary,
    pub structural: Option<StructuralReport>,
    pub structural_error: Option<String>,
    pub subspace_ellipticity: SubspaceEllipticity,
    pub gain: GainSummary,
    /// Observability and interest consistency; runs are refused without
    /// these.
    pub required_pass: bool,
    /// All checks including structural connectivity and ellipticity; a
    /// failing model may still be simulated to observe its behavior.
    pub all_pass: bool,
}

pub fn run_checks(model: &NetworkModel, config: &ScenarioConfig) -> Result<CheckReport> {
    let obs = model.check_global_observability();
    let consistency = model.check_interest_consistency();
    let mean_l = model.graph_process().mean_laplacian();
    let lambda2 = mean_l.algebraic_connectivity();

    let (structural, structural_error) = match model.check_structural_observability() {
        Ok(report) => (Some(report), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let ellipticity = model.verify_a5(config.schedule.beta0(), config.schedule.a())?;
    let floor = if ellipticity.c1 > 0.0 {
        model
            .min_valid_gain(config.schedule.beta0(), ellipticity.c1)
            .ok()
    } else {
        None
    };
    let meets_floor = floor.map(|f| config.schedule.a() >= f);

    let required_pass = obs.full_rank && consistency;
    let structural_pass = structural.as_ref().map(|s| s.pass).unwrap_or(false);
    let all_pass = required_pass && structural_pass && ellipticity.holds;

    Ok(CheckReport {
        node_count: model.node_count(),
        global_observability: ObservabilitySummary {
            full_rank: obs.full_rank,
            min_eigenvalue: obs.min_eigenvalue,
            max_eigenvalue: obs.max_eigenvalue,
        },
        interest_consistency: consistency,
        mean_connectivity: ConnectivitySummary {
            lambda2,
            connected: lambda2 > cirfe_core::graph::CONNECTIVITY_TOL,
        },
        structural,
        structural_error,
        subspace_ellipticity: ellipticity,
        gain: GainSummary {
            gain: config.schedule.a(),
            floor,
            meets_floor,
            enforced: config.enforce_gain_floor,
        },
        required_pass,
        all_pass,
    })
}

impl CheckReport {
    /// Human-readable reasons the hard gate failed.
    pub fn required_failures(&self) -> Vec<String> {
        let mut reasons = Vec::new();
        if !self.global_observability.full_rank {
            reasons.push(format!(
                "global observability: information matrix is rank deficient \
                 (min eigenvalue {:.3e})",
                self.global_observability.min_eigenvalue
            ));
        }
        if !self.interest_consistency {
            reasons.push(
                "interest consistency: some agent's sensed components are not all in \
                 its interest set"
                    .to_string(),
            );
        }
        reasons
    }
}

//! The estimator updates: the interest-set-censored consensus+innovations
//! step in per-agent and compact (stacked, lifted) forms, the full-state
//! consensus+innovations baseline, decaying weight schedules, and the
//! plug-in noise-covariance estimator.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::censor::{self, CensoredLaplacian};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::sensing::NetworkModel;

/// Tolerance for the interest-subspace membership check in the compact step.
pub const SUBSPACE_TOL: f64 = 1e-9;

/// Decaying consensus and innovation weights:
/// beta_t = beta0 / (t+1)^delta1 and alpha_t = a / (t+1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSchedule {
    a: f64,
    beta0: f64,
    delta1: f64,
}

impl WeightSchedule {
    /// `delta1` must lie in (0, 1/2); with every noise moment finite that is
    /// the full admissible range for the consensus decay exponent.
    pub fn new(a: f64, beta0: f64, delta1: f64) -> Result<Self> {
        if a <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "innovation gain must be positive, got {a}"
            )));
        }
        if beta0 <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "consensus gain must be positive, got {beta0}"
            )));
        }
        if !(delta1 > 0.0 && delta1 < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "delta1 must be in (0, 1/2), got {delta1}"
            )));
        }
        Ok(Self { a, beta0, delta1 })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn beta0(&self) -> f64 {
        self.beta0
    }

    pub fn delta1(&self) -> f64 {
        self.delta1
    }

    pub fn alpha(&self, t: u64) -> f64 {
        self.a / (t + 1) as f64
    }

    pub fn beta(&self, t: u64) -> f64 {
        self.beta0 / ((t + 1) as f64).powf(self.delta1)
    }
}

/// How the innovation residual is weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnovationWeighting {
    /// Standard weighting by the inverse noise covariance.
    NoiseCovariance,
    /// Residual used as-is; avoids any matrix inversion at a cost in
    /// asymptotic covariance, while convergence is retained.
    Identity,
}

/// All agents' low-dimensional estimates at one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkState {
    t: u64,
    estimates: Vec<Vec<f64>>,
}

impl NetworkState {
    pub fn zeros(model: &NetworkModel) -> Self {
        Self {
            t: 0,
            estimates: model
                .interests()
                .iter()
                .map(|i| vec![0.0; i.len()])
                .collect(),
        }
    }

    /// Initialize every agent at the restriction of the true field to its
    /// interest set.
    pub fn at_truth(model: &NetworkModel) -> Self {
        let theta = model.theta_vector();
        Self {
            t: 0,
            estimates: model
                .interests()
                .iter()
                .map(|i| censor::restrict(&theta, i).iter().copied().collect())
                .collect(),
        }
    }

    /// Wrap raw per-agent estimate vectors without model validation; used
    /// where dimensions are guaranteed by construction (e.g. simulation
    /// engines and full-state baseline snapshots).
    pub fn from_raw(t: u64, estimates: Vec<Vec<f64>>) -> Self {
        Self { t, estimates }
    }

    pub fn from_estimates(model: &NetworkModel, t: u64, estimates: Vec<DVector<f64>>) -> Result<Self> {
        if estimates.len() != model.node_count() {
            return Err(Error::DimensionMismatch {
                context: "network state agent count",
                expected: model.node_count(),
                actual: estimates.len(),
            });
        }
        for (est, interest) in estimates.iter().zip(model.interests()) {
            if est.len() != interest.len() {
                return Err(Error::DimensionMismatch {
                    context: "network state estimate length",
                    expected: interest.len(),
                    actual: est.len(),
                });
            }
        }
        Ok(Self {
            t,
            estimates: estimates.iter().map(|e| e.iter().copied().collect()).collect(),
        })
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn estimate(&self, agent: usize) -> DVector<f64> {
        DVector::from_column_slice(&self.estimates[agent])
    }

    pub fn estimate_slice(&self, agent: usize) -> &[f64] {
        &self.estimates[agent]
    }

    pub fn agent_count(&self) -> usize {
        self.estimates.len()
    }

    /// Agent `n`'s estimate lifted to the full field dimension.
    pub fn lifted(&self, model: &NetworkModel, agent: usize) -> DVector<f64> {
        censor::lift(
            &self.estimate(agent),
            model.interest_of(agent),
            model.node_count(),
        )
        .expect("state dimensions validated at construction")
    }

    /// The stacked N^2 vector of all lifted estimates; always lies in the
    /// interest subspace by construction.
    pub fn stacked_lifted(&self, model: &NetworkModel) -> DVector<f64> {
        let n = model.node_count();
        let mut out = DVector::zeros(n * n);
        for agent in 0..n {
            let interest = model.interest_of(agent);
            for (j, &c) in interest.indices().iter().enumerate() {
                out[agent * n + c] = self.estimates[agent][j];
            }
        }
        out
    }

    /// Rebuild per-agent estimates from a stacked lifted vector.
    pub fn from_stacked(model: &NetworkModel, t: u64, stacked: &DVector<f64>) -> Self {
        let n = model.node_count();
        let estimates = model
            .interests()
            .iter()
            .enumerate()
            .map(|(agent, interest)| {
                interest
                    .indices()
                    .iter()
                    .map(|&c| stacked[agent * n + c])
                    .collect()
            })
            .collect();
        Self { t, estimates }
    }
}

fn check_observations(model: &NetworkModel, observations: &[DVector<f64>]) -> Result<()> {
    if observations.len() != model.node_count() {
        return Err(Error::DimensionMismatch {
            context: "observation count",
            expected: model.node_count(),
            actual: observations.len(),
        });
    }
    for (obs, sensing) in observations.iter().zip(model.sensing()) {
        if obs.len() != sensing.observation_dim() {
            return Err(Error::DimensionMismatch {
                context: "observation length",
                expected: sensing.observation_dim(),
                actual: obs.len(),
            });
        }
    }
    Ok(())
}

/// One synchronous censored consensus+innovations step: every agent reads
/// the step-t state of its neighbors, differences the self- and received
/// censored messages, and adds the innovation along its own sensing
/// directions restricted to its interest set.
pub fn cirfe_step(
    state: &NetworkState,
    model: &NetworkModel,
    schedule: &WeightSchedule,
    topology: &Graph,
    observations: &[DVector<f64>],
) -> Result<NetworkState> {
    cirfe_step_weighted(
        state,
        model,
        schedule,
        topology,
        observations,
        InnovationWeighting::NoiseCovariance,
    )
}

/// `cirfe_step` with an explicit innovation weighting.
pub fn cirfe_step_weighted(
    state: &NetworkState,
    model: &NetworkModel,
    schedule: &WeightSchedule,
    topology: &Graph,
    observations: &[DVector<f64>],
    weighting: InnovationWeighting,
) -> Result<NetworkState> {
    let n = model.node_count();
    if topology.node_count() != n {
        return Err(Error::DimensionMismatch {
            context: "topology node count",
            expected: n,
            actual: topology.node_count(),
        });
    }
    check_observations(model, observations)?;
    let t = state.t;
    let alpha = schedule.alpha(t);
    let beta = schedule.beta(t);

    let mut next = Vec::with_capacity(n);
    for agent in 0..n {
        let interest = model.interest_of(agent);
        let sensing = model.sensing_for(agent);
        let x_own = state.estimate(agent);

        let mut consensus = DVector::zeros(interest.len());
        for &l in topology.neighbors(agent) {
            let x_l = state.estimate(l);
            let own = censor::censor_self(&x_own, interest, model.interest_of(l))?;
            let recv = censor::censor_received(&x_l, model.interest_of(l), interest)?;
            consensus += own - recv;
        }

        let lifted = censor::lift(&x_own, interest, n)?;
        let resid = &observations[agent] - sensing.h() * &lifted;
        let weighted = match weighting {
            InnovationWeighting::NoiseCovariance => sensing.r_inv() * &resid,
            InnovationWeighting::Identity => resid,
        };
        let direction = sensing.h().transpose() * &weighted;

        let updated = DVector::from_iterator(
            interest.len(),
            (0..interest.len()).map(|j| {
                x_own[j] - beta * consensus[j] + alpha * direction[interest.component(j)]
            }),
        );
        next.push(updated);
    }
    let mut out = NetworkState::from_estimates(model, t + 1, next)?;
    out.t = t + 1;
    Ok(out)
}

/// The same update in stacked lifted coordinates:
/// x(t+1) = x(t) - beta_t L_P(t) x(t) + alpha_t P G_H R^-1 (y - G_H^T P x).
/// The input must already lie in the interest subspace; the output then stays
/// in it exactly.
pub fn compact_step(
    lifted_state: &DVector<f64>,
    model: &NetworkModel,
    schedule: &WeightSchedule,
    t: u64,
    lp_t: &CensoredLaplacian,
    observations: &[DVector<f64>],
) -> Result<DVector<f64>> {
    compact_step_weighted(
        lifted_state,
        model,
        schedule,
        t,
        lp_t,
        observations,
        InnovationWeighting::NoiseCovariance,
    )
}

pub fn compact_step_weighted(
    lifted_state: &DVector<f64>,
    model: &NetworkModel,
    schedule: &WeightSchedule,
    t: u64,
    lp_t: &CensoredLaplacian,
    observations: &[DVector<f64>],
    weighting: InnovationWeighting,
) -> Result<DVector<f64>> {
    let n = model.node_count();
    if lifted_state.len() != n * n {
        return Err(Error::DimensionMismatch {
            context: "stacked state length",
            expected: n * n,
            actual: lifted_state.len(),
        });
    }
    if lp_t.node_count() != n {
        return Err(Error::DimensionMismatch {
            context: "censored laplacian size",
            expected: n,
            actual: lp_t.node_count(),
        });
    }
    check_observations(model, observations)?;
    let residual = censor::subspace_residual(model.interests(), lifted_state);
    if residual > SUBSPACE_TOL {
        return Err(Error::OutsideInterestSubspace { residual });
    }
    let alpha = schedule.alpha(t);
    let beta = schedule.beta(t);

    let consensus = lp_t.apply(lifted_state);
    let mut out = lifted_state - beta * consensus;
    for agent in 0..n {
        let interest = model.interest_of(agent);
        let sensing = model.sensing_for(agent);
        let block = lifted_state.rows(agent * n, n).into_owned();
        let projected = censor::Projector::from_interest(interest).apply(&block);
        let resid = &observations[agent] - sensing.h() * &projected;
        let weighted = match weighting {
            InnovationWeighting::NoiseCovariance => sensing.r_inv() * &resid,
            InnovationWeighting::Identity => resid,
        };
        let direction = sensing.h().transpose() * &weighted;
        for &c in interest.indices() {
            out[agent * n + c] += alpha * direction[c];
        }
    }
    Ok(out)
}

/// Innovation premultiplier for the full-state baseline estimator.
#[derive(Debug, Clone)]
pub struct ClassicalInnovationGain {
    /// Per-agent N x M_n matrices applied to the R^-1-weighted residual.
    matrices: Vec<DMatrix<f64>>,
    kind: ClassicalGainKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassicalGainKind {
    /// Plain H^T direction; the censored update with full interest sets
    /// reduces to exactly this baseline.
    Identity,
    /// Premultiplied by the inverse of (1/N) sum H^T R^-1 H; whitens the
    /// innovation so every field direction converges at the same rate.
    ModelAverage,
}

impl ClassicalInnovationGain {
    pub fn identity(model: &NetworkModel) -> Self {
        Self {
            matrices: model.sensing().iter().map(|s| s.h().transpose()).collect(),
            kind: ClassicalGainKind::Identity,
        }
    }

    pub fn model_average(model: &NetworkModel) -> Result<Self> {
        let n = model.node_count() as f64;
        let gamma = model.check_global_observability().matrix / n;
        let gamma_inv = gamma
            .try_inverse()
            .ok_or_else(|| Error::InvalidParameter("average information matrix is singular".into()))?;
        Ok(Self {
            matrices: model
                .sensing()
                .iter()
                .map(|s| &gamma_inv * s.h().transpose())
                .collect(),
            kind: ClassicalGainKind::ModelAverage,
        })
    }

    pub fn prepare(kind: ClassicalGainKind, model: &NetworkModel) -> Result<Self> {
        match kind {
            ClassicalGainKind::Identity => Ok(Self::identity(model)),
            ClassicalGainKind::ModelAverage => Self::model_average(model),
        }
    }

    pub fn kind(&self) -> ClassicalGainKind {
        self.kind
    }

    pub fn matrix_for(&self, agent: usize) -> &DMatrix<f64> {
        &self.matrices[agent]
    }
}

/// Full-information consensus+innovations baseline: every agent carries an
/// estimate of the entire field and exchanges it uncensored.
pub fn classical_step(
    states: &[DVector<f64>],
    model: &NetworkModel,
    schedule: &WeightSchedule,
    t: u64,
    topology: &Graph,
    observations: &[DVector<f64>],
    gain: &ClassicalInnovationGain,
) -> Result<Vec<DVector<f64>>> {
    let n = model.node_count();
    if states.len() != n {
        return Err(Error::DimensionMismatch {
            context: "classical state count",
            expected: n,
            actual: states.len(),
        });
    }
    for s in states {
        if s.len() != n {
            return Err(Error::DimensionMismatch {
                context: "classical state length",
                expected: n,
                actual: s.len(),
            });
        }
    }
    check_observations(model, observations)?;
    let alpha = schedule.alpha(t);
    let beta = schedule.beta(t);

    let mut next = Vec::with_capacity(n);
    for agent in 0..n {
        let sensing = model.sensing_for(agent);
        let x_own = &states[agent];

        let mut consensus = DVector::zeros(n);
        for &l in topology.neighbors(agent) {
            consensus += x_own - &states[l];
        }

        let resid = &observations[agent] - sensing.h() * x_own;
        let weighted = sensing.r_inv() * &resid;
        let direction = gain.matrix_for(agent) * &weighted;

        let updated = DVector::from_iterator(
            n,
            (0..n).map(|j| x_own[j] - beta * consensus[j] + alpha * direction[j]),
        );
        next.push(updated);
    }
    Ok(next)
}

/// Running first and second observation moments for one agent, feeding the
/// plug-in inverse-covariance estimate used when R is unknown.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationStats {
    count: u64,
    sum: DVector<f64>,
    outer: DMatrix<f64>,
}

impl ObservationStats {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0,
            sum: DVector::zeros(dim),
            outer: DMatrix::zeros(dim, dim),
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn update(&mut self, y: &DVector<f64>) {
        self.count += 1;
        self.sum += y;
        self.outer += y * y.transpose();
    }

    /// Sample covariance of the observations seen so far (zero until two
    /// samples are available).
    pub fn covariance(&self) -> DMatrix<f64> {
        let dim = self.sum.len();
        if self.count < 2 {
            return DMatrix::zeros(dim, dim);
        }
        let c = self.count as f64;
        let centered = &self.outer - (&self.sum * self.sum.transpose()) / c;
        centered / (c - 1.0)
    }

    /// (Q + gamma I)^-1 with Q the sample covariance; the regularizer keeps
    /// the matrix invertible at all times.
    pub fn regularized_inverse(&self, gamma: f64) -> Result<DMatrix<f64>> {
        if gamma <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "regularizer must be positive, got {gamma}"
            )));
        }
        let dim = self.sum.len();
        let mut q = self.covariance();
        for i in 0..dim {
            q[(i, i)] += gamma;
        }
        q.try_inverse().ok_or(Error::NotPositiveDefinite)
    }
}

/// Fold one observation into the running statistics and return the updated
/// regularized inverse-covariance estimate.
pub fn plugin_covariance_update(
    stats: &mut ObservationStats,
    y: &DVector<f64>,
    gamma_t: f64,
) -> Result<DMatrix<f64>> {
    stats.update(y);
    stats.regularized_inverse(gamma_t)
}

/// Append trajectory rows `(trial, t, agent, component, estimate)` with
/// 1-based agent and component indices.
pub fn write_trajectory_rows<W: std::io::Write>(
    out: &mut W,
    model: &NetworkModel,
    trial: u64,
    state: &NetworkState,
) -> std::io::Result<()> {
    for agent in 0..model.node_count() {
        let interest = model.interest_of(agent);
        for (j, &c) in interest.indices().iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{}",
                trial,
                state.t(),
                agent + 1,
                c + 1,
                state.estimate_slice(agent)[j]
            )?;
        }
    }
    Ok(())
}

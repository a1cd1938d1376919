//! Monte Carlo execution: a buffer-reusing trial engine that reproduces the
//! core update rules operation-for-operation, per-trial derived random
//! streams, and order-independent aggregation.

use cirfe_core::estimator::{ClassicalInnovationGain, NetworkState, ObservationStats};
use cirfe_core::sensing::NetworkModel;
use cirfe_core::stream;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::checks::{run_checks, CheckReport};
use crate::error::{Error, Result};
use crate::scenario::{log_points, EstimatorKind, InitKind, ScenarioConfig};

/// Per-component readout curve (trial-averaged absolute error).
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ComponentCurve {
    /// 1-based component index.
    pub component: usize,
    /// Readout label: the estimator name, with "_d" appended for the
    /// far-agent readout of the baseline.
    pub label: String,
    /// 1-based agent the readout is taken from, when it is a single agent.
    pub agent: Option<usize>,
    pub values: Vec<f64>,
}

/// Everything a run produces. All numeric payloads are pure functions of the
/// configuration; wall time is kept separate so reports stay comparable.
#[derive(Debug, Clone, Serialize)]
pub struct RunResult {
    pub config_hash: String,
    pub log_points: Vec<u64>,
    /// Trial-averaged normalized error per log point and agent.
    pub mean_normalized_errors: Vec<Vec<f64>>,
    /// Trial-averaged squared network error per log point.
    pub network_mse: Vec<f64>,
    /// sqrt(horizon+1)-scaled final errors per trial, agent, and local
    /// component; populated when the "scaled_errors" output is requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scaled_errors: Option<Vec<Vec<Vec<f64>>>>,
    /// Final per-trial states; populated for the "final_states" output.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_states: Option<Vec<NetworkState>>,
    /// Per-trial states at every log point; "trajectories" output.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectories: Option<Vec<Vec<NetworkState>>>,
    pub component_curves: Vec<ComponentCurve>,
    pub checks: CheckReport,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub wall_time_s: f64,
}

/// Hash of the configuration with the model resolved inline; identifies the
/// exact experiment independent of how the model was referenced.
pub fn config_hash(config: &ScenarioConfig, model: &NetworkModel) -> Result<String> {
    #[derive(Serialize)]
    struct Resolved<'a> {
        config: &'a ScenarioConfig,
        model: &'a NetworkModel,
    }
    let text = serde_json::to_string(&Resolved { config, model })?;
    let digest = Sha256::digest(text.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

// ---------------------------------------------------------------------------
// Trial engine
// ---------------------------------------------------------------------------

struct NeighborLink {
    other: usize,
    edge: usize,
    /// (own local position, other's local position) of shared components.
    shared: Vec<(usize, usize)>,
}

struct AgentPlan {
    /// Sorted interest components.
    interest: Vec<usize>,
    obs_dim: usize,
    /// Row-major M x |I|: sensing coefficients at the interest components.
    h_local: Vec<f64>,
    /// Row-major M x M.
    r_inv: Vec<f64>,
    noiseless: Vec<f64>,
    links: Vec<NeighborLink>,
    /// Baseline only: row-major N x M innovation gain matrix.
    gain: Vec<f64>,
}

struct Engine<'a> {
    model: &'a NetworkModel,
    config: &'a ScenarioConfig,
    plans: Vec<AgentPlan>,
    theta: Vec<f64>,
    /// Base-graph edges in canonical order (for activation masks).
    base_edges: Vec<(usize, usize)>,
    is_static: bool,
    points: Vec<u64>,
    tracked: Vec<TrackedComponent>,
}

struct TrackedComponent {
    component: usize,
    /// 0-based agents averaged for the censored estimator readout.
    interested: Vec<usize>,
    near: usize,
    far: usize,
}

struct TrialOutput {
    /// [point][agent]
    normalized_errors: Vec<Vec<f64>>,
    /// [point]
    squared_error: Vec<f64>,
    /// [point][tracked readout] absolute component errors.
    component_errors: Vec<Vec<f64>>,
    scaled_final: Option<Vec<Vec<f64>>>,
    final_state: Option<NetworkState>,
    trajectory: Option<Vec<NetworkState>>,
}

impl<'a> Engine<'a> {
    fn new(model: &'a NetworkModel, config: &'a ScenarioConfig) -> Result<Self> {
        let n = model.node_count();
        let classical = config.estimator == EstimatorKind::Classical;
        let base = model.graph_process().base_graph();
        let base_edges: Vec<(usize, usize)> = base.edges().to_vec();
        let edge_index = |a: usize, b: usize| -> usize {
            let key = (a.min(b), a.max(b));
            base_edges.binary_search(&key).expect("edge exists")
        };

        let gain_matrices = if classical {
            Some(ClassicalInnovationGain::prepare(config.classical_gain, model)?)
        } else {
            None
        };

        let theta = model.theta_star().0.clone();
        let theta_vec = model.theta_vector();
        let mut plans = Vec::with_capacity(n);
        for agent in 0..n {
            let sensing = model.sensing_for(agent);
            let interest_set = model.interest_of(agent);
            let interest: Vec<usize> = if classical {
                (0..n).collect()
            } else {
                interest_set.indices().to_vec()
            };
            let m = sensing.observation_dim();
            let mut h_local = vec![0.0; m * interest.len()];
            for row in 0..m {
                for (j, &c) in interest.iter().enumerate() {
                    h_local[row * interest.len() + j] = sensing.h()[(row, c)];
                }
            }
            let mut r_inv = vec![0.0; m * m];
            for row in 0..m {
                for col in 0..m {
                    r_inv[row * m + col] = sensing.r_inv()[(row, col)];
                }
            }
            let noiseless: Vec<f64> = sensing.noiseless(&theta_vec).iter().copied().collect();

            let mut links = Vec::new();
            for &other in base.neighbors(agent) {
                let shared: Vec<(usize, usize)> = if classical {
                    (0..n).map(|c| (c, c)).collect()
                } else {
                    interest_set
                        .indices()
                        .iter()
                        .enumerate()
                        .filter_map(|(j, &c)| {
                            model.interest_of(other).position(c).map(|pos| (j, pos))
                        })
                        .collect()
                };
                links.push(NeighborLink {
                    other,
                    edge: edge_index(agent, other),
                    shared,
                });
            }

            let gain = if let Some(g) = &gain_matrices {
                let gm = g.matrix_for(agent);
                let mut flat = vec![0.0; n * m];
                for row in 0..n {
                    for col in 0..m {
                        flat[row * m + col] = gm[(row, col)];
                    }
                }
                flat
            } else {
                Vec::new()
            };

            plans.push(AgentPlan {
                interest,
                obs_dim: m,
                h_local,
                r_inv,
                noiseless,
                links,
                gain,
            });
        }

        let mut tracked = Vec::new();
        for &comp_one_based in &config.tracked_components {
            let component = comp_one_based - 1;
            let interested = model.interested_agents(component);
            let observers: Vec<usize> = (0..n)
                .filter(|&a| {
                    (0..model.sensing_for(a).observation_dim())
                        .any(|r| model.sensing_for(a).h()[(r, component)].abs() > 1e-12)
                })
                .collect();
            let near = observers.first().copied().unwrap_or(0);
            let dist = base.hop_distances(near);
            let far = (0..n)
                .filter(|&v| dist[v] != usize::MAX)
                .max_by_key(|&v| (dist[v], std::cmp::Reverse(v)))
                .unwrap_or(near);
            tracked.push(TrackedComponent {
                component,
                interested,
                near,
                far,
            });
        }

        Ok(Self {
            model,
            config,
            plans,
            theta,
            base_edges,
            is_static: model.graph_process().is_static(),
            points: log_points(config.horizon),
            tracked,
        })
    }

    fn initial_state(&self) -> Vec<Vec<f64>> {
        self.plans
            .iter()
            .map(|p| match self.config.init {
                InitKind::Zero => vec![0.0; p.interest.len()],
                InitKind::Truth => p.interest.iter().map(|&c| self.theta[c]).collect(),
            })
            .collect()
    }

    fn record(&self, state: &[Vec<f64>], out: &mut TrialOutput, point_idx: usize, t: u64) {
        let classical = self.config.estimator == EstimatorKind::Classical;
        for (agent, plan) in self.plans.iter().enumerate() {
            let mut sq = 0.0;
            for (j, &c) in plan.interest.iter().enumerate() {
                let d = state[agent][j] - self.theta[c];
                sq += d * d;
            }
            out.normalized_errors[point_idx][agent] = sq.sqrt() / plan.interest.len() as f64;
            out.squared_error[point_idx] += sq;
        }
        for (k, tc) in self.tracked.iter().enumerate() {
            let err = if classical {
                // Near readout first, far readout second.
                let near = (state[tc.near][tc.component] - self.theta[tc.component]).abs();
                let far = (state[tc.far][tc.component] - self.theta[tc.component]).abs();
                out.component_errors[point_idx][2 * k] = near;
                out.component_errors[point_idx][2 * k + 1] = far;
                continue;
            } else {
                let mut sum = 0.0;
                for &agent in &tc.interested {
                    let j = self.model.interest_of(agent).position(tc.component).expect("tracked");
                    sum += (state[agent][j] - self.theta[tc.component]).abs();
                }
                sum / tc.interested.len() as f64
            };
            out.component_errors[point_idx][k] = err;
        }
        let _ = t;
    }

    fn run_trial(&self, trial: u64) -> TrialOutput {
        let config = self.config;
        let n = self.model.node_count();
        let points = &self.points;
        let readouts = if config.estimator == EstimatorKind::Classical {
            2 * self.tracked.len()
        } else {
            self.tracked.len()
        };
        let mut out = TrialOutput {
            normalized_errors: vec![vec![0.0; n]; points.len()],
            squared_error: vec![0.0; points.len()],
            component_errors: vec![vec![0.0; readouts]; points.len()],
            scaled_final: None,
            final_state: None,
            trajectory: if config.wants("trajectories") {
                Some(Vec::with_capacity(points.len()))
            } else {
                None
            },
        };

        let mut rng = stream::trial_noise_rng(config.seed, trial);
        let graph_process = if self.is_static {
            None
        } else {
            Some(self.model.graph_process().with_seed(stream::trial_graph_seed(
                config.seed,
                trial,
            )))
        };

        let mut state = self.initial_state();
        let mut next = state.clone();
        let max_obs = self.plans.iter().map(|p| p.obs_dim).max().unwrap_or(1);
        let max_dim = self.plans.iter().map(|p| p.interest.len()).max().unwrap_or(1);
        let mut obs: Vec<Vec<f64>> = self.plans.iter().map(|p| vec![0.0; p.obs_dim]).collect();
        let mut draws = vec![0.0; max_obs];
        let mut resid = vec![0.0; max_obs];
        let mut weighted = vec![0.0; max_obs];
        let mut cons = vec![0.0; max_dim];
        let mut dir = vec![0.0; max_dim];
        let mut active = vec![true; self.base_edges.len()];
        let mut plugin_stats: Vec<ObservationStats> = if config.estimator
            == EstimatorKind::CirfePluginCovariance
        {
            self.plans.iter().map(|p| ObservationStats::new(p.obs_dim)).collect()
        } else {
            Vec::new()
        };

        let mut point_idx = 0usize;
        if points[0] == 0 {
            self.record(&state, &mut out, 0, 0);
            if let Some(traj) = &mut out.trajectory {
                traj.push(self.state_snapshot(&state, 0));
            }
            point_idx = 1;
        }

        for t in 0..config.horizon {
            // Topology at this step.
            if let Some(process) = &graph_process {
                let sampled = process.sample_graph(t);
                for (e, &(a, b)) in self.base_edges.iter().enumerate() {
                    active[e] = sampled.has_edge(a, b);
                }
            }

            // Observations for every agent, in agent order; the draw count
            // per agent is fixed so streams align across estimator kinds.
            for (agent, plan) in self.plans.iter().enumerate() {
                let m = plan.obs_dim;
                if config.zero_noise {
                    obs[agent][..m].copy_from_slice(&plan.noiseless);
                } else {
                    let sensing = self.model.sensing_for(agent);
                    sensing.observe_with(
                        &plan.noiseless,
                        &mut rng,
                        &mut draws[..m],
                        &mut obs[agent][..m],
                    );
                }
            }

            let alpha = config.schedule.alpha(t);
            let beta = config.schedule.beta(t);

            for (agent, plan) in self.plans.iter().enumerate() {
                let dim = plan.interest.len();
                let m = plan.obs_dim;

                // Consensus: censored differences with active neighbors.
                cons[..dim].fill(0.0);
                for link in &plan.links {
                    if !active[link.edge] {
                        continue;
                    }
                    let other = &state[link.other];
                    let own = &state[agent];
                    for &(j, pos) in &link.shared {
                        cons[j] += own[j] - other[pos];
                    }
                }

                // Innovation residual.
                for row in 0..m {
                    let mut acc = 0.0;
                    let h_row = &plan.h_local[row * dim..(row + 1) * dim];
                    let x = &state[agent];
                    for j in 0..dim {
                        acc += h_row[j] * x[j];
                    }
                    resid[row] = obs[agent][row] - acc;
                }

                // Residual weighting.
                match config.estimator {
                    EstimatorKind::CirfeIdentityWeight => {
                        weighted[..m].copy_from_slice(&resid[..m]);
                    }
                    EstimatorKind::CirfePluginCovariance => {
                        let gamma = config.plugin_gamma0 / (t + 1) as f64;
                        let r_hat = plugin_stats[agent]
                            .regularized_inverse(gamma)
                            .expect("regularized matrix is invertible");
                        for row in 0..m {
                            let mut acc = 0.0;
                            for col in 0..m {
                                acc += r_hat[(row, col)] * resid[col];
                            }
                            weighted[row] = acc;
                        }
                    }
                    _ => {
                        for row in 0..m {
                            let mut acc = 0.0;
                            for col in 0..m {
                                acc += plan.r_inv[row * m + col] * resid[col];
                            }
                            weighted[row] = acc;
                        }
                    }
                }

                // Innovation direction on the local coordinates.
                if config.estimator == EstimatorKind::Classical {
                    dir[..dim].fill(0.0);
                    for row in 0..m {
                        let w = weighted[row];
                        for c in 0..dim {
                            dir[c] += plan.gain[c * m + row] * w;
                        }
                    }
                } else {
                    dir[..dim].fill(0.0);
                    for row in 0..m {
                        let w = weighted[row];
                        let h_row = &plan.h_local[row * dim..(row + 1) * dim];
                        for j in 0..dim {
                            dir[j] += h_row[j] * w;
                        }
                    }
                }

                let x = &state[agent];
                let out_row = &mut next[agent];
                for j in 0..dim {
                    out_row[j] = x[j] - beta * cons[j] + alpha * dir[j];
                }
            }

            if config.estimator == EstimatorKind::CirfePluginCovariance {
                for (agent, plan) in self.plans.iter().enumerate() {
                    let y = nalgebra::DVector::from_column_slice(&obs[agent][..plan.obs_dim]);
                    plugin_stats[agent].update(&y);
                }
            }

            std::mem::swap(&mut state, &mut next);

            if point_idx < points.len() && t + 1 == points[point_idx] {
                self.record(&state, &mut out, point_idx, t + 1);
                if let Some(traj) = &mut out.trajectory {
                    traj.push(self.state_snapshot(&state, t + 1));
                }
                point_idx += 1;
            }
        }

        if config.wants("scaled_errors") {
            let scale = ((config.horizon + 1) as f64).sqrt();
            out.scaled_final = Some(
                self.plans
                    .iter()
                    .enumerate()
                    .map(|(agent, plan)| {
                        plan.interest
                            .iter()
                            .enumerate()
                            .map(|(j, &c)| scale * (state[agent][j] - self.theta[c]))
                            .collect()
                    })
                    .collect(),
            );
        }
        if config.wants("final_states") {
            out.final_state = Some(self.state_snapshot(&state, config.horizon));
        }
        out
    }

    fn state_snapshot(&self, state: &[Vec<f64>], t: u64) -> NetworkState {
        NetworkState::from_raw(t, state.to_vec())
    }
}

// ---------------------------------------------------------------------------
// Monte Carlo driver
// ---------------------------------------------------------------------------

/// Execute `config.trials` independent trajectories and aggregate. The
/// aggregation is a sum over per-trial results in trial order, so the output
/// is a pure function of the configuration regardless of execution strategy.
pub fn run_monte_carlo(config: &ScenarioConfig) -> Result<RunResult> {
    config.validate()?;
    let started = std::time::Instant::now();
    let model = config.resolve_model()?;
    let checks = run_checks(&model, config)?;

    if !checks.required_pass {
        return Err(Error::ModelChecksFailed {
            reasons: checks.required_failures(),
        });
    }
    let mut warnings = Vec::new();
    if !checks.subspace_ellipticity.holds {
        warnings.push(format!(
            "subspace ellipticity fails (c1 = {:.3e}); estimates of some components \
             will not converge",
            checks.subspace_ellipticity.c1
        ));
    }
    if let (Some(floor), Some(false)) = (checks.gain.floor, checks.gain.meets_floor) {
        if config.enforce_gain_floor {
            return Err(Error::GainBelowFloor {
                gain: config.schedule.a(),
                floor,
            });
        }
        warnings.push(format!(
            "innovation gain {} is below the sufficient floor {:.4}; proceeding because \
             enforce_gain_floor is off",
            config.schedule.a(),
            floor
        ));
    }

    let engine = Engine::new(&model, config)?;
    let points = engine.points.clone();
    let n = model.node_count();
    let readout_count = if config.estimator == EstimatorKind::Classical {
        2 * engine.tracked.len()
    } else {
        engine.tracked.len()
    };

    let mut per_trial: Vec<TrialOutput> = Vec::with_capacity(config.trials as usize);
    for trial in 0..config.trials {
        per_trial.push(engine.run_trial(trial));
    }

    // Reduce in trial order.
    let trials_f = config.trials as f64;
    let mut mean_normalized_errors = vec![vec![0.0; n]; points.len()];
    let mut network_mse = vec![0.0; points.len()];
    let mut component_means = vec![vec![0.0; readout_count]; points.len()];
    for trial_out in &per_trial {
        for p in 0..points.len() {
            for agent in 0..n {
                mean_normalized_errors[p][agent] += trial_out.normalized_errors[p][agent];
            }
            network_mse[p] += trial_out.squared_error[p];
            for r in 0..readout_count {
                component_means[p][r] += trial_out.component_errors[p][r];
            }
        }
    }
    for p in 0..points.len() {
        for agent in 0..n {
            mean_normalized_errors[p][agent] /= trials_f;
        }
        network_mse[p] /= trials_f;
        for r in 0..readout_count {
            component_means[p][r] /= trials_f;
        }
    }

    let mut component_curves = Vec::new();
    for (k, tc) in engine.tracked.iter().enumerate() {
        if config.estimator == EstimatorKind::Classical {
            component_curves.push(ComponentCurve {
                component: tc.component + 1,
                label: "classical".to_string(),
                agent: Some(tc.near + 1),
                values: (0..points.len()).map(|p| component_means[p][2 * k]).collect(),
            });
            component_curves.push(ComponentCurve {
                component: tc.component + 1,
                label: "classical_d".to_string(),
                agent: Some(tc.far + 1),
                values: (0..points.len())
                    .map(|p| component_means[p][2 * k + 1])
                    .collect(),
            });
        } else {
            component_curves.push(ComponentCurve {
                component: tc.component + 1,
                label: config.estimator.to_string(),
                agent: None,
                values: (0..points.len()).map(|p| component_means[p][k]).collect(),
            });
        }
    }

    let scaled_errors = if config.wants("scaled_errors") {
        Some(
            per_trial
                .iter_mut()
                .map(|t| t.scaled_final.take().expect("requested"))
                .collect(),
        )
    } else {
        None
    };
    let final_states = if config.wants("final_states") {
        Some(
            per_trial
                .iter_mut()
                .map(|t| t.final_state.take().expect("requested"))
                .collect(),
        )
    } else {
        None
    };
    let trajectories = if config.wants("trajectories") {
        Some(
            per_trial
                .iter_mut()
                .map(|t| t.trajectory.take().expect("requested"))
                .collect(),
        )
    } else {
        None
    };

    Ok(RunResult {
        config_hash: config_hash(config, &model)?,
        log_points: points,
        mean_normalized_errors,
        network_mse,
        scaled_errors,
        final_states,
        trajectories,
        component_curves,
        checks,
        warnings,
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}


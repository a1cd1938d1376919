//! Per-agent linear sensing models with noise, interest sets, and executable
//! checks of the observability and connectivity conditions a network model
//! must satisfy before estimates of every field component can converge.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::censor;
use crate::error::{Error, Result};
use crate::graph::LaplacianProcess;

/// Entries with magnitude at or below this are treated as structural zeros
/// when reading the coupling pattern off a sensing matrix.
pub const COUPLING_TOL: f64 = 1e-12;

/// Relative eigenvalue tolerance for rank and positivity decisions.
pub const RANK_TOL: f64 = 1e-8;

/// The true global field vector: one scalar state per network node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FieldParameter(pub Vec<f64>);

impl FieldParameter {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.0)
    }
}

/// Supported zero-mean observation noise families. Both have every moment
/// finite, so the admissible consensus decay exponent range is the full
/// (0, 1/2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Gaussian,
    Laplace,
}

fn standardized_sample<R: Rng + ?Sized>(kind: NoiseKind, rng: &mut R) -> f64 {
    match kind {
        NoiseKind::Gaussian => rng.sample(StandardNormal),
        NoiseKind::Laplace => {
            // Inverse CDF of the unit-variance Laplace distribution.
            let u: f64 = rng.gen::<f64>() - 0.5;
            let tail = (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE);
            -u.signum() * tail.ln() / std::f64::consts::SQRT_2
        }
    }
}

/// One agent's observation model y = H theta + gamma, with gamma zero-mean,
/// i.i.d. over time, and Cov(gamma) = R.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingModel {
    h: DMatrix<f64>,
    r: DMatrix<f64>,
    noise_kind: NoiseKind,
    r_inv: DMatrix<f64>,
    // Lower Cholesky factor of R; correlates standardized noise samples.
    noise_factor: DMatrix<f64>,
}

impl SensingModel {
    pub fn new(h: DMatrix<f64>, r: DMatrix<f64>, noise_kind: NoiseKind) -> Result<Self> {
        if r.nrows() != r.ncols() || r.nrows() != h.nrows() {
            return Err(Error::DimensionMismatch {
                context: "noise covariance",
                expected: h.nrows(),
                actual: r.nrows(),
            });
        }
        for i in 0..r.nrows() {
            for j in 0..i {
                if (r[(i, j)] - r[(j, i)]).abs() > 1e-12 {
                    return Err(Error::NotPositiveDefinite);
                }
            }
        }
        let chol = Cholesky::new(r.clone()).ok_or(Error::NotPositiveDefinite)?;
        let r_inv = chol.inverse();
        let noise_factor = chol.l();
        Ok(Self {
            h,
            r,
            noise_kind,
            r_inv,
            noise_factor,
        })
    }

    /// Scalar observation of a single linear functional with variance `r`.
    pub fn scalar(row: &[f64], r: f64, noise_kind: NoiseKind) -> Result<Self> {
        Self::new(
            DMatrix::from_row_slice(1, row.len(), row),
            DMatrix::from_element(1, 1, r),
            noise_kind,
        )
    }

    pub fn observation_dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn field_dim(&self) -> usize {
        self.h.ncols()
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn r_inv(&self) -> &DMatrix<f64> {
        &self.r_inv
    }

    pub fn noise_kind(&self) -> NoiseKind {
        self.noise_kind
    }

    /// Indices (0-based) of field components with a nonzero column in H:
    /// the states that physically influence this agent's observations.
    pub fn physical_coupling(&self) -> Vec<usize> {
        (0..self.h.ncols())
            .filter(|&j| (0..self.h.nrows()).any(|i| self.h[(i, j)].abs() > COUPLING_TOL))
            .collect()
    }

    pub fn noiseless(&self, theta: &DVector<f64>) -> DVector<f64> {
        &self.h * theta
    }

    /// Lower Cholesky factor of R used to correlate noise samples.
    pub fn noise_factor(&self) -> &DMatrix<f64> {
        &self.noise_factor
    }

    /// Draw y = H theta + gamma. Consumes exactly `observation_dim` samples
    /// from `rng` regardless of the noise kind.
    pub fn observe<R: Rng + ?Sized>(&self, theta: &DVector<f64>, rng: &mut R) -> DVector<f64> {
        let m = self.observation_dim();
        let noiseless: Vec<f64> = self.noiseless(theta).iter().copied().collect();
        let mut draws = vec![0.0; m];
        let mut out = vec![0.0; m];
        self.observe_with(&noiseless, rng, &mut draws, &mut out);
        DVector::from_column_slice(&out)
    }

    /// Allocation-free observation draw into caller-provided buffers:
    /// `draws` receives the standardized samples, `out` the observation.
    /// `noiseless` must be H theta for the intended field value.
    pub fn observe_with<R: Rng + ?Sized>(
        &self,
        noiseless: &[f64],
        rng: &mut R,
        draws: &mut [f64],
        out: &mut [f64],
    ) {
        let m = self.observation_dim();
        debug_assert_eq!(noiseless.len(), m);
        debug_assert_eq!(draws.len(), m);
        debug_assert_eq!(out.len(), m);
        for d in draws.iter_mut() {
            *d = standardized_sample(self.noise_kind, rng);
        }
        for row in 0..m {
            let mut acc = 0.0;
            for (col, &d) in draws.iter().enumerate() {
                acc += self.noise_factor[(row, col)] * d;
            }
            out[row] = noiseless[row] + acc;
        }
    }

    pub fn h_transpose_r_inv(&self) -> DMatrix<f64> {
        self.h.transpose() * &self.r_inv
    }
}

/// Sorted set of field components an agent estimates and communicates about.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterestSet {
    indices: Vec<usize>,
    membership: Vec<bool>,
}

impl InterestSet {
    /// Build from 0-based component indices. The set must be nonempty and
    /// within [0, field_dim).
    pub fn new(indices: &[usize], field_dim: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptyInterestSet);
        }
        let mut sorted = indices.to_vec();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateInterest { index: w[0] + 1 });
        }
        if let Some(&bad) = sorted.iter().find(|&&i| i >= field_dim) {
            return Err(Error::InterestOutOfRange {
                index: bad + 1,
                n: field_dim,
            });
        }
        let mut membership = vec![false; field_dim];
        for &i in &sorted {
            membership[i] = true;
        }
        Ok(Self {
            indices: sorted,
            membership,
        })
    }

    pub fn from_one_based(indices: &[usize], field_dim: usize) -> Result<Self> {
        let shifted: Vec<usize> = indices
            .iter()
            .map(|&i| {
                if i == 0 {
                    Err(Error::InterestOutOfRange {
                        index: i,
                        n: field_dim,
                    })
                } else {
                    Ok(i - 1)
                }
            })
            .collect::<Result<_>>()?;
        Self::new(&shifted, field_dim)
    }

    pub fn full(field_dim: usize) -> Self {
        let all: Vec<usize> = (0..field_dim).collect();
        Self::new(&all, field_dim).expect("full set is valid")
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn field_dim(&self) -> usize {
        self.membership.len()
    }

    pub fn is_full(&self) -> bool {
        self.indices.len() == self.membership.len()
    }

    /// Component at local position `j` (0-based on both sides).
    pub fn component(&self, j: usize) -> usize {
        self.indices[j]
    }

    /// Local position of `component`, if present.
    pub fn position(&self, component: usize) -> Option<usize> {
        if component < self.membership.len() && self.membership[component] {
            Some(self.indices.binary_search(&component).expect("member"))
        } else {
            None
        }
    }

    pub fn contains(&self, component: usize) -> bool {
        component < self.membership.len() && self.membership[component]
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.indices.iter().map(|&i| i + 1).collect()
    }
}

/// Global observability report: positivity of G = sum H^T R^-1 H.
#[derive(Debug, Clone, Serialize)]
pub struct GlobalObservability {
    #[serde(skip)]
    pub matrix: DMatrix<f64>,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub full_rank: bool,
}

/// Connectivity of the induced subgraph of agents interested in one component.
#[derive(Debug, Clone, Serialize)]
pub struct ComponentObservability {
    /// 1-based component index.
    pub component: usize,
    /// 1-based agents interested in this component.
    pub members: Vec<usize>,
    pub induced_edge_count: usize,
    pub connected: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct StructuralReport {
    pub components: Vec<ComponentObservability>,
    pub pass: bool,
}

impl StructuralReport {
    /// 1-based components whose induced subgraphs are disconnected.
    pub fn failing_components(&self) -> Vec<usize> {
        self.components
            .iter()
            .filter(|c| !c.connected)
            .map(|c| c.component)
            .collect()
    }
}

/// Result of the subspace ellipticity check that underwrites consistency.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SubspaceEllipticity {
    pub c1: f64,
    pub holds: bool,
}

/// The complete multi-agent estimation problem: who senses what, who is
/// interested in what, how agents communicate, and the ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    sensing: Vec<SensingModel>,
    interests: Vec<InterestSet>,
    graph_process: LaplacianProcess,
    theta_star: FieldParameter,
}

impl NetworkModel {
    pub fn new(
        sensing: Vec<SensingModel>,
        interests: Vec<InterestSet>,
        graph_process: LaplacianProcess,
        theta_star: FieldParameter,
    ) -> Result<Self> {
        let n = graph_process.base_graph().node_count();
        if sensing.len() != n {
            return Err(Error::DimensionMismatch {
                context: "sensing model count",
                expected: n,
                actual: sensing.len(),
            });
        }
        if interests.len() != n {
            return Err(Error::DimensionMismatch {
                context: "interest set count",
                expected: n,
                actual: interests.len(),
            });
        }
        if theta_star.len() != n {
            return Err(Error::DimensionMismatch {
                context: "field parameter length",
                expected: n,
                actual: theta_star.len(),
            });
        }
        for s in &sensing {
            if s.field_dim() != n {
                return Err(Error::DimensionMismatch {
                    context: "sensing matrix columns",
                    expected: n,
                    actual: s.field_dim(),
                });
            }
        }
        for i in &interests {
            if i.field_dim() != n {
                return Err(Error::DimensionMismatch {
                    context: "interest set field dimension",
                    expected: n,
                    actual: i.field_dim(),
                });
            }
        }
        Ok(Self {
            sensing,
            interests,
            graph_process,
            theta_star,
        })
    }

    pub fn node_count(&self) -> usize {
        self.graph_process.base_graph().node_count()
    }

    pub fn sensing(&self) -> &[SensingModel] {
        &self.sensing
    }

    pub fn sensing_for(&self, agent: usize) -> &SensingModel {
        &self.sensing[agent]
    }

    pub fn interests(&self) -> &[InterestSet] {
        &self.interests
    }

    pub fn interest_of(&self, agent: usize) -> &InterestSet {
        &self.interests[agent]
    }

    pub fn graph_process(&self) -> &LaplacianProcess {
        &self.graph_process
    }

    pub fn theta_star(&self) -> &FieldParameter {
        &self.theta_star
    }

    pub fn theta_vector(&self) -> DVector<f64> {
        self.theta_star.as_vector()
    }

    /// Same sensing models and graph, but every agent interested in the
    /// whole field.
    pub fn with_full_interests(&self) -> NetworkModel {
        let n = self.node_count();
        NetworkModel {
            sensing: self.sensing.clone(),
            interests: vec![InterestSet::full(n); n],
            graph_process: self.graph_process.clone(),
            theta_star: self.theta_star.clone(),
        }
    }

    pub fn with_interests(&self, interests: Vec<InterestSet>) -> Result<NetworkModel> {
        NetworkModel::new(
            self.sensing.clone(),
            interests,
            self.graph_process.clone(),
            self.theta_star.clone(),
        )
    }

    /// G = sum_n H_n^T R_n^-1 H_n, with a relative-eigenvalue rank verdict.
    /// Full rank means a hypothetical fusion center seeing all observations
    /// could identify the whole field.
    pub fn check_global_observability(&self) -> GlobalObservability {
        let n = self.node_count();
        let mut g = DMatrix::<f64>::zeros(n, n);
        for s in &self.sensing {
            g += s.h.transpose() * &s.r_inv * &s.h;
        }
        let eig = g.clone().symmetric_eigen().eigenvalues;
        let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
        let max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        GlobalObservability {
            matrix: g,
            min_eigenvalue: min,
            max_eigenvalue: max,
            full_rank: min > RANK_TOL * max.max(0.0),
        }
    }

    /// True iff every agent's physical coupling is contained in its
    /// interest set, so censored innovations lose no sensed information.
    pub fn check_interest_consistency(&self) -> bool {
        self.sensing.iter().zip(&self.interests).all(|(s, i)| {
            s.physical_coupling().iter().all(|&c| i.contains(c))
        })
    }

    /// Agents (0-based) interested in `component`.
    pub fn interested_agents(&self, component: usize) -> Vec<usize> {
        (0..self.node_count())
            .filter(|&n| self.interests[n].contains(component))
            .collect()
    }

    /// For each field component, the induced subgraph of the mean
    /// communication graph on the agents interested in it, and whether that
    /// subgraph is connected. All components connected is a sufficient
    /// condition for the subspace ellipticity check below.
    pub fn check_structural_observability(&self) -> Result<StructuralReport> {
        let base = self.graph_process.base_graph();
        let mut components = Vec::with_capacity(self.node_count());
        for r in 0..self.node_count() {
            let members = self.interested_agents(r);
            if members.is_empty() {
                return Err(Error::UnclaimedComponent { component: r + 1 });
            }
            let (sub, _) = base.induced_subgraph(&members)?;
            components.push(ComponentObservability {
                component: r + 1,
                members: members.iter().map(|&m| m + 1).collect(),
                induced_edge_count: sub.edge_count(),
                connected: sub.is_connected(),
            });
        }
        let pass = components.iter().all(|c| c.connected);
        Ok(StructuralReport { components, pass })
    }

    /// S = sum_n P_n H_n^T R_n^-1 H_n P_n. When interest consistency holds
    /// this equals G, since the projectors then absorb no nonzero entries.
    pub fn information_matrix(&self) -> DMatrix<f64> {
        let n = self.node_count();
        let mut s = DMatrix::<f64>::zeros(n, n);
        for (model, interest) in self.sensing.iter().zip(&self.interests) {
            let a = model.h.transpose() * &model.r_inv * &model.h;
            for &i in interest.indices() {
                for &j in interest.indices() {
                    s[(i, j)] += a[(i, j)];
                }
            }
        }
        s
    }

    /// Direct eigenvalue check of the ellipticity condition on the interest
    /// subspace: the smallest eigenvalue c1 of
    ///   (beta0/a) * mean censored Laplacian + blockdiag(P H^T R^-1 H P)
    /// restricted to the coordinates agents actually hold. Connectivity of
    /// every component's induced subgraph is sufficient but not necessary
    /// for c1 > 0, so the check is by eigensolve rather than by the
    /// combinatorial condition.
    pub fn verify_a5(&self, beta0: f64, a: f64) -> Result<SubspaceEllipticity> {
        if beta0 <= 0.0 || a <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "weights must be positive: beta0 = {beta0}, a = {a}"
            )));
        }
        let n = self.node_count();
        let ratio = beta0 / a;
        let mean_lp =
            censor::build_censored_laplacian(&self.graph_process.mean_laplacian(), &self.interests)?;
        let lp_dense = mean_lp.to_dense();

        // Coordinates of the interest subspace: (agent, component) pairs the
        // agent actually estimates.
        let coords: Vec<usize> = (0..n)
            .flat_map(|agent| {
                self.interests[agent]
                    .indices()
                    .iter()
                    .map(move |&c| agent * n + c)
                    .collect::<Vec<_>>()
            })
            .collect();

        let dim = coords.len();
        let mut b = DMatrix::<f64>::zeros(dim, dim);
        for (p, &cp) in coords.iter().enumerate() {
            for (q, &cq) in coords.iter().enumerate() {
                b[(p, q)] = ratio * lp_dense[(cp, cq)];
            }
        }
        // Innovation term is block diagonal over agents.
        let mut offset = 0;
        for (model, interest) in self.sensing.iter().zip(&self.interests) {
            let a_mat = model.h.transpose() * &model.r_inv * &model.h;
            let k = interest.len();
            for p in 0..k {
                for q in 0..k {
                    b[(offset + p, offset + q)] +=
                        a_mat[(interest.component(p), interest.component(q))];
                }
            }
            offset += k;
        }
        let eig = b.symmetric_eigen().eigenvalues;
        let c1 = eig.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(SubspaceEllipticity {
            c1,
            holds: c1 > RANK_TOL,
        })
    }

    /// Smallest innovation gain a* for which
    ///   a * min(lambda_min(S), c1, 1/beta0) >= 1.
    /// Any a >= a* satisfies the gain condition with the supplied c1.
    pub fn min_valid_gain(&self, beta0: f64, c1: f64) -> Result<f64> {
        if beta0 <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "beta0 must be positive, got {beta0}"
            )));
        }
        let s = self.information_matrix();
        let eig = s.symmetric_eigen().eigenvalues;
        let lambda_min = eig.iter().copied().fold(f64::INFINITY, f64::min);
        if lambda_min <= 0.0 {
            return Err(Error::GainUnsatisfiable {
                term: "lambda_min(information matrix)",
                value: lambda_min,
            });
        }
        if c1 <= 0.0 {
            return Err(Error::GainUnsatisfiable {
                term: "c1",
                value: c1,
            });
        }
        Ok(1.0 / lambda_min.min(c1).min(1.0 / beta0))
    }
}

#[derive(Serialize, Deserialize)]
struct MatrixWire {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl MatrixWire {
    fn from_matrix(m: &DMatrix<f64>) -> Self {
        let mut data = Vec::with_capacity(m.nrows() * m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push(m[(i, j)]);
            }
        }
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }

    fn to_matrix(&self) -> std::result::Result<DMatrix<f64>, String> {
        if self.data.len() != self.rows * self.cols {
            return Err(format!(
                "matrix wire data length {} does not match {}x{}",
                self.data.len(),
                self.rows,
                self.cols
            ));
        }
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

#[derive(Serialize, Deserialize)]
struct SensingWire {
    h: MatrixWire,
    r: MatrixWire,
    noise_kind: NoiseKind,
}

#[derive(Serialize, Deserialize)]
struct NetworkModelWire {
    graph: crate::graph::Graph,
    edge_activation_probability: f64,
    graph_seed: u64,
    sensing: Vec<SensingWire>,
    interests: Vec<Vec<usize>>,
    theta_star: Vec<f64>,
}

impl Serialize for NetworkModel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let wire = NetworkModelWire {
            graph: self.graph_process.base_graph().clone(),
            edge_activation_probability: self.graph_process.edge_activation_probability(),
            graph_seed: self.graph_process.seed(),
            sensing: self
                .sensing
                .iter()
                .map(|m| SensingWire {
                    h: MatrixWire::from_matrix(&m.h),
                    r: MatrixWire::from_matrix(&m.r),
                    noise_kind: m.noise_kind,
                })
                .collect(),
            interests: self.interests.iter().map(|i| i.one_based()).collect(),
            theta_star: self.theta_star.0.clone(),
        };
        wire.serialize(s)
    }
}

impl<'de> Deserialize<'de> for NetworkModel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let wire = NetworkModelWire::deserialize(d)?;
        let n = wire.graph.node_count();
        let process = LaplacianProcess::new(
            wire.graph,
            wire.edge_activation_probability,
            wire.graph_seed,
        )
        .map_err(D::Error::custom)?;
        let sensing = wire
            .sensing
            .into_iter()
            .map(|s| {
                SensingModel::new(
                    s.h.to_matrix().map_err(D::Error::custom)?,
                    s.r.to_matrix().map_err(D::Error::custom)?,
                    s.noise_kind,
                )
                .map_err(D::Error::custom)
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let interests = wire
            .interests
            .iter()
            .map(|i| InterestSet::from_one_based(i, n).map_err(D::Error::custom))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        NetworkModel::new(sensing, interests, process, FieldParameter(wire.theta_star))
            .map_err(D::Error::custom)
    }
}

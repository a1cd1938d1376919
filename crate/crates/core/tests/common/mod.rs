//! Shared builders for integration tests: seeded random network models.
#![allow(dead_code)]

use cirfe_core::graph::{Graph, LaplacianProcess};
use cirfe_core::sensing::{FieldParameter, InterestSet, NetworkModel, NoiseKind, SensingModel};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random connected graph: a random spanning tree plus extra edges.
pub fn random_connected_graph<R: Rng>(rng: &mut R, n: usize) -> Graph {
    let mut edges = Vec::new();
    for v in 1..n {
        let parent = rng.gen_range(0..v);
        edges.push((parent, v));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if !edges.contains(&(i, j)) && rng.gen_bool(0.25) {
                edges.push((i, j));
            }
        }
    }
    Graph::new(n, &edges).unwrap()
}

/// Random interest set containing `anchor`.
pub fn random_interest<R: Rng>(rng: &mut R, n: usize, anchor: usize) -> InterestSet {
    let mut indices = vec![anchor];
    for c in 0..n {
        if c != anchor && rng.gen_bool(0.4) {
            indices.push(c);
        }
    }
    InterestSet::new(&indices, n).unwrap()
}

/// Random model with interest-consistent sensing (nonzero H columns only on
/// interest components), suitable for update-rule equivalence tests.
pub fn random_model(rng: &mut ChaCha8Rng, n: usize, time_varying: bool) -> NetworkModel {
    let graph = random_connected_graph(rng, n);
    let process = if time_varying {
        LaplacianProcess::new(graph, 0.7, rng.gen()).unwrap()
    } else {
        LaplacianProcess::static_graph(graph)
    };
    let interests: Vec<InterestSet> = (0..n).map(|a| random_interest(rng, n, a)).collect();
    let mut sensing = Vec::with_capacity(n);
    for interest in &interests {
        let rows = rng.gen_range(1..=2usize);
        let mut h = DMatrix::<f64>::zeros(rows, n);
        for r in 0..rows {
            for &c in interest.indices() {
                if rng.gen_bool(0.8) {
                    h[(r, c)] = rng.gen_range(-2.0..2.0);
                }
            }
        }
        // Keep at least one nonzero entry so the agent actually senses.
        if h.iter().all(|&x| x == 0.0) {
            h[(0, interest.component(0))] = 1.0;
        }
        let r_mat = if rows == 1 {
            DMatrix::from_element(1, 1, rng.gen_range(0.5..2.0))
        } else {
            let l = DMatrix::from_row_slice(
                2,
                2,
                &[
                    rng.gen_range(0.6..1.5),
                    0.0,
                    rng.gen_range(-0.4..0.4),
                    rng.gen_range(0.6..1.5),
                ],
            );
            &l * l.transpose()
        };
        let kind = if rng.gen_bool(0.5) {
            NoiseKind::Gaussian
        } else {
            NoiseKind::Laplace
        };
        sensing.push(SensingModel::new(h, r_mat, kind).unwrap());
    }
    let theta = FieldParameter((0..n).map(|_| rng.gen_range(-2.0..2.0)).collect());
    NetworkModel::new(sensing, interests, process, theta).unwrap()
}

/// Schedule with gains scaled to the model so that the very first steps are
/// already contractions; keeps trajectories O(1) and makes tight relative
/// comparisons meaningful.
pub fn stable_schedule(model: &NetworkModel) -> cirfe_core::estimator::WeightSchedule {
    let g_max = model.check_global_observability().max_eigenvalue.max(1e-6);
    let degree_bound = (0..model.node_count())
        .map(|v| model.graph_process().base_graph().degree(v))
        .max()
        .unwrap_or(1)
        .max(1) as f64;
    cirfe_core::estimator::WeightSchedule::new(0.5 / g_max, 0.5 / (2.0 * degree_bound), 0.3)
        .unwrap()
}

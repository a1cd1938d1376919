//! Trajectory-level agreement between the per-agent update, the compact
//! stacked update, and (with full interest sets) the baseline estimator.

mod common;

use cirfe_core::censor::{build_censored_laplacian, subspace_residual};
use cirfe_core::estimator::{
    cirfe_step, classical_step, compact_step, ClassicalInnovationGain, NetworkState,
};
use cirfe_core::sensing::NetworkModel;
use cirfe_core::stream;
use nalgebra::DVector;
use rand_chacha::ChaCha8Rng;

fn relative_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

fn observations_at(model: &NetworkModel, rng: &mut ChaCha8Rng) -> Vec<DVector<f64>> {
    let theta = model.theta_vector();
    model
        .sensing()
        .iter()
        .map(|s| s.observe(&theta, rng))
        .collect()
}

#[test]
fn per_agent_and_compact_trajectories_agree() {
    let mut rng = stream::stream_rng(31, 0);
    for trial in 0..20u64 {
        use rand::Rng;
        let n = rng.gen_range(2..=8usize);
        let time_varying = trial % 2 == 1;
        let model = common::random_model(&mut rng, n, time_varying);
        let schedule = common::stable_schedule(&model);
        let mut obs_rng = stream::trial_noise_rng(100 + trial, 0);

        let mut state = NetworkState::zeros(&model);
        let mut stacked = state.stacked_lifted(&model);
        for t in 0..100u64 {
            let topology = model.graph_process().sample_graph(t);
            let lp = build_censored_laplacian(&topology.laplacian(), model.interests()).unwrap();
            let obs = observations_at(&model, &mut obs_rng);
            state = cirfe_step(&state, &model, &schedule, &topology, &obs).unwrap();
            stacked = compact_step(&stacked, &model, &schedule, t, &lp, &obs).unwrap();

            let from_agents = state.stacked_lifted(&model);
            for i in 0..stacked.len() {
                assert!(
                    relative_close(from_agents[i], stacked[i], 1e-10),
                    "trial {trial}, t {t}, coord {i}: {} vs {}",
                    from_agents[i],
                    stacked[i]
                );
            }
            // The compact iterate never leaves the interest subspace.
            assert_eq!(subspace_residual(model.interests(), &stacked), 0.0);
        }
    }
}

#[test]
fn full_interest_update_reduces_to_the_baseline_exactly() {
    let mut rng = stream::stream_rng(32, 0);
    for trial in 0..10u64 {
        use rand::Rng;
        let n = rng.gen_range(2..=6usize);
        let model = common::random_model(&mut rng, n, false).with_full_interests();
        let schedule = common::stable_schedule(&model);
        let gain = ClassicalInnovationGain::identity(&model);
        let topology = model.graph_process().base_graph().clone();
        let mut obs_rng = stream::trial_noise_rng(200 + trial, 0);

        let mut censored = NetworkState::zeros(&model);
        let mut baseline: Vec<DVector<f64>> = vec![DVector::zeros(n); n];
        for t in 0..50u64 {
            let obs = observations_at(&model, &mut obs_rng);
            censored = cirfe_step(&censored, &model, &schedule, &topology, &obs).unwrap();
            baseline =
                classical_step(&baseline, &model, &schedule, t, &topology, &obs, &gain).unwrap();
            for agent in 0..n {
                let c = censored.estimate(agent);
                for j in 0..n {
                    assert!(
                        c[j] == baseline[agent][j],
                        "trial {trial}, t {t}, agent {agent}, component {j}: \
                         {} != {}",
                        c[j],
                        baseline[agent][j]
                    );
                }
            }
        }
    }
}

#[test]
fn trajectories_are_deterministic_in_the_seed() {
    let mut rng = stream::stream_rng(33, 0);
    let model = common::random_model(&mut rng, 5, true);
    let schedule = common::stable_schedule(&model);

    let run = |seed: u64| -> NetworkState {
        let mut obs_rng = stream::trial_noise_rng(seed, 3);
        let mut state = NetworkState::zeros(&model);
        for t in 0..80u64 {
            let topology = model.graph_process().sample_graph(t);
            let obs = observations_at(&model, &mut obs_rng);
            state = cirfe_step(&state, &model, &schedule, &topology, &obs).unwrap();
        }
        state
    };
    let a = run(77);
    let b = run(77);
    let c = run(78);
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn zero_noise_truth_initialization_is_stationary_for_random_models() {
    let mut rng = stream::stream_rng(34, 0);
    for _ in 0..100 {
        use rand::Rng;
        let n = rng.gen_range(2..=8usize);
        let model = common::random_model(&mut rng, n, false);
        let schedule = common::stable_schedule(&model);
        let topology = model.graph_process().base_graph().clone();
        let theta = model.theta_vector();
        let obs: Vec<DVector<f64>> = model
            .sensing()
            .iter()
            .map(|s| s.noiseless(&theta))
            .collect();
        let start = NetworkState::at_truth(&model);
        let mut state = start.clone();
        for _ in 0..5 {
            state = cirfe_step(&state, &model, &schedule, &topology, &obs).unwrap();
        }
        for agent in 0..n {
            assert_eq!(
                state.estimate_slice(agent),
                start.estimate_slice(agent),
                "agent {agent} drifted under zero noise"
            );
        }
    }
}

#[test]
fn state_checkpoint_round_trips_through_json() {
    let mut rng = stream::stream_rng(35, 0);
    let model = common::random_model(&mut rng, 4, false);
    let schedule = common::stable_schedule(&model);
    let topology = model.graph_process().base_graph().clone();
    let mut obs_rng = stream::trial_noise_rng(9, 0);
    let mut state = NetworkState::zeros(&model);
    for _ in 0..7 {
        let obs = observations_at(&model, &mut obs_rng);
        state = cirfe_step(&state, &model, &schedule, &topology, &obs).unwrap();
    }
    let json = serde_json::to_string(&state).unwrap();
    let back: NetworkState = serde_json::from_str(&json).unwrap();
    assert_eq!(back, state);
    assert_eq!(back.t(), 7);
}

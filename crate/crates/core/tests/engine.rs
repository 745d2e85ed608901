mod common;

use std::f64::consts::FRAC_PI_4;

use fedadp::aggregation::{self, StrategyTag};
use fedadp::data::{generate_synthetic_split, partition, Dataset, NodePartition, PartitionPlan};
use fedadp::engine::{self, global_gradient, local_update, recover_gradients, Simulation, TrainConfig};
use fedadp::models::{self, ModelSpec};
use fedadp::ParamVector;

fn setup(shorthand: &str, per_node: usize) -> (Dataset, Dataset, Vec<NodePartition>) {
    let (train, test) = generate_synthetic_split(3000, 500, 8, 5, 4).unwrap();
    let plan = PartitionPlan::from_shorthand(shorthand, per_node, 4).unwrap();
    let nodes = partition(&train, &plan).unwrap();
    (train, test, nodes)
}

fn config(strategy: StrategyTag, rounds: usize) -> TrainConfig {
    TrainConfig {
        strategy,
        rounds,
        eta0: 0.05,
        seed: 11,
        ..TrainConfig::default()
    }
}

#[test]
fn local_update_step_count_and_single_batch() {
    let (train, _, nodes) = setup("2IID", 600);
    let spec = ModelSpec::mlr(8, 5);
    let w = models::init_params(&spec, 0);

    let u = local_update(&spec, &train, &w, &nodes[0], 0.01, 1, 50, 1).unwrap();
    assert_eq!(u.steps, 12);
    assert_eq!(local_update(&spec, &train, &w, &nodes[0], 0.01, 2, 50, 1).unwrap().steps, 24);

    let full = local_update(&spec, &train, &w, &nodes[1], 0.01, 1, 600, 5).unwrap();
    assert_eq!(full.steps, 1);
    let g = models::gradient(&spec, &w, &train.gather(nodes[1].indices()).unwrap()).unwrap();
    for (d, gk) in full.delta.iter().zip(g.iter()) {
        assert!((d + 0.01 * gk).abs() < 1e-15);
    }
}

#[test]
fn perfectly_fit_node_has_zero_delta() {
    // one sample, MLR weights pinning its class far above the clamp threshold
    let ds = Dataset::new(vec![0.0, 0.0], 2, vec![1], 2).unwrap();
    let spec = ModelSpec::mlr(2, 2);
    let w = ParamVector::new(vec![0.0, 0.0, 0.0, 0.0, -400.0, 400.0]);
    let part = NodePartition::new(0, fedadp::data::NodeSetting::Iid, vec![0]);
    let u = local_update(&spec, &ds, &w, &part, 0.1, 3, 1, 0).unwrap();
    assert!(u.delta.is_zero());
}

#[test]
fn hand_geometry_round() {
    let grads = [ParamVector::new(vec![1.0, 0.0]), ParamVector::new(vec![0.0, 1.0])];
    let global = global_gradient(&grads, &[600, 600]).unwrap();
    assert_eq!(global.as_slice(), &[0.5, 0.5]);
    let angles: Vec<f64> = grads
        .iter()
        .map(|g| aggregation::instantaneous_angle(&global, g).unwrap())
        .collect();
    for a in &angles {
        assert!((a - FRAC_PI_4).abs() < 1e-15);
    }
    let w = aggregation::fedadp_weights(&angles, &[600, 600], 5.0).unwrap();
    assert_eq!(w.weights[0], w.weights[1]);
}

#[test]
fn round_update_matches_weighted_deltas() {
    let (train, test, nodes) = setup("2IID+2NonIID(1)", 300);
    let spec = ModelSpec::mlr(8, 5);
    let cfg = config(StrategyTag::FedAdp, 3);
    let mut sim = Simulation::new(spec.clone(), &train, &test, nodes.clone(), cfg.clone()).unwrap();
    for t in 1..=3 {
        let before = sim.global_model().clone();
        let record = sim.run_round(t).unwrap();
        let deltas: Vec<ParamVector> = sim
            .node_states()
            .iter()
            .map(|s| s.last_delta.clone().unwrap())
            .collect();
        let change = sim.global_model().sub(&before).unwrap();
        let expected = engine::weighted_sum(&deltas, &record.weights.weights).unwrap();
        for (a, b) in change.iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        // the recorded smoothed angles are the node states
        for (k, s) in sim.node_states().iter().enumerate() {
            assert_eq!(s.smoothed_angle, Some(record.smoothed_angles[k]));
            assert_eq!(s.participation_count, t);
        }
    }
}

#[test]
fn single_step_pseudo_gradient_is_exact_gradient() {
    let (train, _, nodes) = setup("3IID", 200);
    for spec in [ModelSpec::mlr(8, 5), ModelSpec::mlp(8, 5, vec![6])] {
        let w = models::init_params(&spec, 2);
        let eta = 0.03;
        let deltas: Vec<ParamVector> = nodes
            .iter()
            .map(|p| local_update(&spec, &train, &w, p, eta, 1, 200, 0).unwrap().delta)
            .collect();
        for (g, p) in recover_gradients(&deltas, eta).iter().zip(&nodes) {
            let exact = models::gradient(&spec, &w, &train.gather(p.indices()).unwrap()).unwrap();
            for (a, b) in g.iter().zip(exact.iter()) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }
}

#[test]
fn learning_rate_decays_geometrically() {
    let (train, test, nodes) = setup("2IID", 100);
    let cfg = TrainConfig {
        decay: 0.9,
        ..config(StrategyTag::FedAvg, 6)
    };
    let records = Simulation::new(ModelSpec::mlr(8, 5), &train, &test, nodes, cfg)
        .unwrap()
        .run()
        .unwrap();
    assert_eq!(records[0].eta, 0.05);
    for pair in records.windows(2) {
        assert_eq!(pair[1].eta, pair[0].eta * 0.9);
    }
}

#[test]
fn fedavg_equal_sizes_gives_uniform_weights() {
    let (train, test, nodes) = setup("1IID+3NonIID(2)", 150);
    let records = Simulation::new(ModelSpec::mlr(8, 5), &train, &test, nodes, config(StrategyTag::FedAvg, 2))
        .unwrap()
        .run()
        .unwrap();
    for r in &records {
        assert!(r.weights.weights.iter().all(|&w| w == 0.25));
    }
}

#[test]
fn identical_nodes_get_identical_fedadp_weights() {
    let (train, test, nodes) = setup("1IID", 200);
    let copies: Vec<NodePartition> = (0..4)
        .map(|i| NodePartition::new(i, nodes[0].setting, nodes[0].indices().to_vec()))
        .collect();
    let mut sim = Simulation::new(ModelSpec::mlr(8, 5), &train, &test, copies, config(StrategyTag::FedAdp, 3)).unwrap();
    for r in sim.run().unwrap() {
        for w in &r.weights.weights {
            assert!((w - 0.25).abs() < 1e-12);
        }
    }
}

#[test]
fn one_round_gives_one_record_and_reruns_are_identical() {
    let (train, test, _) = setup("1IID", 10);
    let plan = PartitionPlan::from_shorthand("2IID+2NonIID(1)", 200, 8).unwrap();
    let spec = ModelSpec::mlp(8, 5, vec![4]);
    let one = engine::run_experiment(&train, &test, &plan, &spec, &config(StrategyTag::FedAdp, 1), &[0.5]).unwrap();
    assert_eq!(one.records.len(), 1);
    assert_eq!(one.rounds_to_target.len(), 1);

    let cfg = config(StrategyTag::FedAdp, 4);
    let a = engine::run_experiment(&train, &test, &plan, &spec, &cfg, &[0.5]).unwrap();
    let b = engine::run_experiment(&train, &test, &plan, &spec, &cfg, &[0.5]).unwrap();
    assert_eq!(a, b);
}

#[test]
fn thread_count_does_not_change_results() {
    let (train, test, _) = setup("1IID", 10);
    let plan = PartitionPlan::from_shorthand("3IID+3NonIID(2)", 300, 2).unwrap();
    let spec = ModelSpec::mlr(8, 5);
    let cfg = config(StrategyTag::FedAdp, 5);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| engine::run_experiment(&train, &test, &plan, &spec, &cfg, &[]).unwrap())
    };
    let one = run(1);
    let many = run(6);
    assert_eq!(one.final_model, many.final_model);
    assert_eq!(one.records, many.records);
}

#[test]
fn partial_participation_tracks_per_node_counts() {
    let (train, test, nodes) = setup("6IID", 100);
    let cfg = TrainConfig {
        clients_per_round: Some(2),
        ..config(StrategyTag::FedAdp, 10)
    };
    let mut sim = Simulation::new(ModelSpec::mlr(8, 5), &train, &test, nodes, cfg).unwrap();
    let records = sim.run().unwrap();
    let mut counts = [0usize; 6];
    for r in &records {
        assert_eq!(r.participants.len(), 2);
        assert!((r.weights.sum() - 1.0).abs() < 1e-12);
        for &p in &r.participants {
            counts[p] += 1;
        }
    }
    for (state, count) in sim.node_states().iter().zip(counts) {
        assert_eq!(state.participation_count, count);
        assert_eq!(state.smoothed_angle.is_some(), count > 0);
    }
}

#[test]
fn rounds_must_run_in_order() {
    let (train, test, nodes) = setup("2IID", 50);
    let mut sim = Simulation::new(ModelSpec::mlr(8, 5), &train, &test, nodes, config(StrategyTag::FedAvg, 3)).unwrap();
    assert!(sim.run_round(2).is_err());
    sim.run_round(1).unwrap();
    assert!(sim.run_round(1).is_err());
}

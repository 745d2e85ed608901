mod common;

use fedadp::data::{batches, generate_synthetic, NodePartition, NodeSetting};
use fedadp::models::{self, ModelKind, ModelSpec};

#[test]
fn analytic_gradients_match_central_differences() {
    for (i, spec) in common::fd_instances().iter().enumerate() {
        let (w, batch) = common::random_instance(spec, 1 + i % 7, i as u64);
        let err = common::max_fd_error(spec, &w, &batch);
        assert!(err < 1e-4, "{:?} instance {i}: relative error {err:e}", spec.kind);
    }
    let kinds: Vec<ModelKind> = common::fd_instances().iter().map(|s| s.kind).collect();
    assert_eq!(kinds.iter().filter(|k| **k == ModelKind::Mlr).count(), 20);
    assert_eq!(kinds.iter().filter(|k| **k == ModelKind::Mlp).count(), 20);
}

#[test]
fn gradient_check_at_initialization() {
    // zero-init MLR and the MLP's uniform init, not just random points
    for spec in [ModelSpec::mlr(6, 4), ModelSpec::mlp(6, 4, vec![5])] {
        let (_, batch) = common::random_instance(&spec, 8, 99);
        let w = models::init_params(&spec, 3);
        assert!(common::max_fd_error(&spec, &w, &batch) < 1e-4);
    }
}

#[test]
fn central_training_reaches_ninety_percent() {
    let ds = generate_synthetic(1000, 20, 10, 1).unwrap();
    let spec = ModelSpec::mlr(20, 10);
    let mut w = models::init_params(&spec, 0);
    let everyone = NodePartition::new(0, NodeSetting::Iid, (0..ds.len()).collect());
    let all = ds.as_batch().unwrap();
    let mut reached = None;
    for epoch in 0..200u64 {
        for b in batches(&ds, &everyone, 50, epoch).unwrap() {
            w.axpy(-0.01, &models::gradient(&spec, &w, &b).unwrap()).unwrap();
        }
        if models::accuracy(&spec, &w, &all).unwrap() >= 0.9 {
            reached = Some(epoch + 1);
            break;
        }
    }
    assert!(reached.is_some(), "train accuracy stayed below 90% for 200 epochs");
}

#![allow(dead_code)]

use std::path::PathBuf;

use rand::Rng;

use fedadp::models::{self, Batch, ModelSpec};
use fedadp::seed::{self, Stream};
use fedadp::ParamVector;

pub const FD_STEP: f64 = 1e-5;

pub fn workspace_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// Random parameters, features in [0,1] and labels for a gradient check.
pub fn random_instance(spec: &ModelSpec, batch_len: usize, instance: u64) -> (ParamVector, Batch) {
    let mut rng = seed::rng(instance, Stream::SyntheticSamples, &[batch_len as u64]);
    let w: Vec<f64> = (0..spec.param_count())
        .map(|_| rng.random_range(-0.5..0.5))
        .collect();
    let features: Vec<f64> = (0..batch_len * spec.input_dim)
        .map(|_| rng.random_range(0.0..1.0))
        .collect();
    let labels: Vec<usize> = (0..batch_len)
        .map(|_| rng.random_range(0..spec.num_classes))
        .collect();
    (
        ParamVector::new(w),
        Batch::new(features, spec.input_dim, labels).unwrap(),
    )
}

/// Largest relative error between the analytic gradient and central
/// differences, with relative error `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn max_fd_error(spec: &ModelSpec, w: &ParamVector, batch: &Batch) -> f64 {
    let analytic = models::gradient(spec, w, batch).unwrap();
    let mut worst = 0.0f64;
    let mut probe = w.clone();
    for k in 0..w.len() {
        let orig = probe[k];
        probe.as_mut_slice()[k] = orig + FD_STEP;
        let up = models::loss(spec, &probe, batch).unwrap();
        probe.as_mut_slice()[k] = orig - FD_STEP;
        let down = models::loss(spec, &probe, batch).unwrap();
        probe.as_mut_slice()[k] = orig;
        let numeric = (up - down) / (2.0 * FD_STEP);
        let a = analytic[k];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    worst
}

/// The gradient-check suite: 20 MLR and 20 MLP instances of varying shape.
pub fn fd_instances() -> Vec<ModelSpec> {
    let mut specs = Vec::new();
    for i in 0..20 {
        specs.push(ModelSpec::mlr(3 + i % 5, 2 + i % 4));
    }
    for i in 0..20 {
        let hidden = if i % 3 == 0 { vec![4, 3] } else { vec![2 + i % 6] };
        specs.push(ModelSpec::mlp(2 + i % 4, 2 + i % 3, hidden));
    }
    specs
}

//! Round diagnostics and experiment summaries.

use crate::aggregation::StrategyTag;
use crate::engine::RoundRecord;
use crate::error::{Error, Result};
use crate::numerics::{self, ParamVector};

/// Mean distance between the global gradient and each node's gradient.
pub fn divergence(grads: &[ParamVector], global_grad: &ParamVector) -> Result<f64> {
    if grads.is_empty() {
        return Err(Error::State("no node gradients".into()));
    }
    let mut total = 0.0;
    for g in grads {
        total += numerics::norm(&global_grad.sub(g)?);
    }
    Ok(total / grads.len() as f64)
}

/// First round whose test accuracy reaches `target`.
pub fn rounds_to_target(records: &[RoundRecord], target: f64) -> Option<usize> {
    records
        .iter()
        .find(|r| r.test_accuracy >= target)
        .map(|r| r.round)
}

pub fn best_accuracy(records: &[RoundRecord]) -> f64 {
    records
        .iter()
        .map(|r| r.test_accuracy)
        .fold(0.0, f64::max)
}

/// Median of per-seed round counts, treating "never reached" as larger than
/// any count. `None` when the median itself falls on an unreached run.
pub fn median_rounds(values: &[Option<usize>]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    // None sorts after every Some(_)
    sorted.sort_by_key(|v| v.map_or((1, 0), |r| (0, r)));
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2].map(|r| r as f64)
    } else {
        match (sorted[n / 2 - 1], sorted[n / 2]) {
            (Some(a), Some(b)) => Some((a + b) as f64 / 2.0),
            _ => None,
        }
    }
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    Some(if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    })
}

/// Mean of `divergence` over rounds `first..=last` (inclusive, 1-based).
pub fn mean_divergence(records: &[RoundRecord], first: usize, last: usize) -> Option<f64> {
    let window: Vec<f64> = records
        .iter()
        .filter(|r| (first..=last).contains(&r.round))
        .map(|r| r.divergence)
        .collect();
    if window.is_empty() {
        None
    } else {
        Some(window.iter().sum::<f64>() / window.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSummary {
    pub strategy: StrategyTag,
    pub rounds_to_target: Vec<(f64, Option<usize>)>,
    pub best_accuracy: f64,
    pub final_accuracy: f64,
    pub final_loss: f64,
    pub per_round: Vec<RoundRecord>,
}

impl ExperimentSummary {
    pub fn from_records(strategy: StrategyTag, records: Vec<RoundRecord>, targets: &[f64]) -> Self {
        let mut sorted = targets.to_vec();
        sorted.sort_by(f64::total_cmp);
        let last = records.last();
        ExperimentSummary {
            strategy,
            rounds_to_target: sorted
                .iter()
                .map(|&t| (t, rounds_to_target(&records, t)))
                .collect(),
            best_accuracy: best_accuracy(&records),
            final_accuracy: last.map_or(0.0, |r| r.test_accuracy),
            final_loss: last.map_or(f64::NAN, |r| r.train_loss),
            per_round: records,
        }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::aggregation::AggregationWeights;

    pub(crate) fn record(round: usize, accuracy: f64) -> RoundRecord {
        RoundRecord {
            round,
            eta: 0.01,
            participants: vec![0],
            weights: AggregationWeights {
                weights: vec![1.0],
                strategy: StrategyTag::FedAvg,
            },
            instantaneous_angles: vec![0.0],
            smoothed_angles: vec![0.0],
            global_grad_norm: 1.0,
            train_loss: 0.5,
            test_loss: 0.5,
            test_accuracy: accuracy,
            divergence: round as f64,
            chebyshev_lhs: 1.0,
            chebyshev_rhs: 1.0,
            empirical_a: Some(1.0),
            empirical_b: Some(1.0),
        }
    }

    #[test]
    fn divergence_examples() {
        let g = ParamVector::new(vec![0.5, -1.0]);
        assert_eq!(divergence(&[g.clone(), g.clone()], &g).unwrap(), 0.0);

        let minus = g.scaled(-1.0);
        let d = divergence(&[g.clone(), minus], &ParamVector::zeros(2)).unwrap();
        assert!((d - numerics::norm(&g)).abs() < 1e-15);

        // global (1,1); distances: |(0,1)| = 1, |(1,-1)| = sqrt 2, |(-2,0)| = 2
        let grads = [
            ParamVector::new(vec![1.0, 0.0]),
            ParamVector::new(vec![0.0, 2.0]),
            ParamVector::new(vec![3.0, 1.0]),
        ];
        let d = divergence(&grads, &ParamVector::new(vec![1.0, 1.0])).unwrap();
        assert!((d - (3.0 + 2f64.sqrt()) / 3.0).abs() < 1e-15);
        assert!(divergence(&[], &g).is_err());
    }

    #[test]
    fn rounds_to_target_examples() {
        let records: Vec<_> = [0.3, 0.96, 0.94]
            .iter()
            .enumerate()
            .map(|(i, &a)| record(i + 1, a))
            .collect();
        assert_eq!(rounds_to_target(&records, 0.95), Some(2));
        assert_eq!(rounds_to_target(&records, 0.99), None);
        assert_eq!(best_accuracy(&records), 0.96);
        assert_eq!(rounds_to_target(&records, 0.3), Some(1));

        let s = ExperimentSummary::from_records(StrategyTag::FedAvg, records, &[0.99, 0.3, 0.95]);
        assert_eq!(
            s.rounds_to_target,
            vec![(0.3, Some(1)), (0.95, Some(2)), (0.99, None)]
        );
        assert_eq!(s.final_accuracy, 0.94);
    }

    #[test]
    fn median_rounds_handles_unreached() {
        assert_eq!(median_rounds(&[Some(5), None, Some(3)]), Some(5.0));
        assert_eq!(median_rounds(&[None, None, Some(3)]), None);
        assert_eq!(median_rounds(&[Some(4), Some(6)]), Some(5.0));
        assert_eq!(median_rounds(&[Some(4), None]), None);
        assert_eq!(median_rounds(&[]), None);
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
    }

    #[test]
    fn mean_divergence_window() {
        let records: Vec<_> = (1..=60).map(|t| record(t, 0.5)).collect();
        // mean of 10..=50
        assert_eq!(mean_divergence(&records, 10, 50), Some(30.0));
        assert_eq!(mean_divergence(&records, 70, 80), None);
    }
}

//! Aggregation weighting: size-proportional FedAvg weights and the adaptive
//! FedAdp pipeline (gradient angle, running-average smoothing, Gompertz
//! contribution score, softmax weighting).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{self, ParamVector};

/// Default Gompertz constant.
pub const DEFAULT_ALPHA: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyTag {
    FedAvg,
    FedAdp,
}

impl fmt::Display for StrategyTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StrategyTag::FedAvg => "fedavg",
            StrategyTag::FedAdp => "fedadp",
        })
    }
}

impl FromStr for StrategyTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fedavg" => Ok(StrategyTag::FedAvg),
            "fedadp" => Ok(StrategyTag::FedAdp),
            _ => Err(Error::config(
                "train.strategy",
                format!("unknown strategy `{s}` (expected fedavg or fedadp)"),
            )),
        }
    }
}

/// Normalized per-node aggregation weights for one round.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregationWeights {
    pub weights: Vec<f64>,
    pub strategy: StrategyTag,
}

impl AggregationWeights {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

fn check_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.is_empty() {
        return Err(Error::State("no participating nodes to weight".into()));
    }
    if let Some(i) = sizes.iter().position(|&d| d == 0) {
        return Err(Error::State(format!("node at position {i} has no samples")));
    }
    Ok(())
}

/// `psi_i = D_i / sum D`.
pub fn fedavg_weights(sizes: &[usize]) -> Result<AggregationWeights> {
    check_sizes(sizes)?;
    let total: usize = sizes.iter().sum();
    Ok(AggregationWeights {
        weights: sizes.iter().map(|&d| d as f64 / total as f64).collect(),
        strategy: StrategyTag::FedAvg,
    })
}

/// Angle between a node's gradient and the global gradient.
pub fn instantaneous_angle(global_grad: &ParamVector, node_grad: &ParamVector) -> Result<f64> {
    numerics::angle_between(global_grad, node_grad)
}

/// Running mean of a node's angles over its `t` participations.
pub fn update_smoothed_angle(prev: Option<f64>, theta: f64, t: usize) -> Result<f64> {
    if !(0.0..=std::f64::consts::PI).contains(&theta) {
        return Err(Error::State(format!("angle {theta} outside [0, pi]")));
    }
    match (t, prev) {
        (0, _) => Err(Error::State("participation index starts at 1".into())),
        (1, _) => Ok(theta),
        (_, None) => Err(Error::State(format!(
            "smoothed angle missing before participation {t}"
        ))),
        (t, Some(prev)) => {
            let t = t as f64;
            Ok((t - 1.0) / t * prev + theta / t)
        }
    }
}

/// Gompertz contribution score `alpha * (1 - exp(-exp(-alpha * (theta - 1))))`,
/// strictly decreasing in `theta`.
pub fn gompertz_map(theta: f64, alpha: f64) -> f64 {
    alpha * -(-(-alpha * (theta - 1.0)).exp()).exp_m1()
}

/// `alpha - gompertz_map(theta, alpha)`, evaluated without cancellation.
///
/// For small angles the score rounds to exactly `alpha` in `f64`; the deficit
/// keeps resolving the ordering there.
pub fn gompertz_deficit(theta: f64, alpha: f64) -> f64 {
    alpha * (-(-alpha * (theta - 1.0)).exp()).exp()
}

/// Softmax of Gompertz scores. Equal sizes use the plain softmax; otherwise
/// each term is scaled by its node's sample count.
pub fn fedadp_weights(
    smoothed_angles: &[f64],
    sizes: &[usize],
    alpha: f64,
) -> Result<AggregationWeights> {
    check_sizes(sizes)?;
    if smoothed_angles.len() != sizes.len() {
        return Err(Error::Dimension {
            context: "fedadp angles",
            expected: sizes.len(),
            actual: smoothed_angles.len(),
        });
    }
    let scores: Vec<f64> = smoothed_angles
        .iter()
        .map(|&theta| gompertz_map(theta, alpha))
        .collect();
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let equal_sizes = sizes.iter().all(|&d| d == sizes[0]);
    let terms: Vec<f64> = scores
        .iter()
        .zip(sizes)
        .map(|(&s, &d)| {
            let e = (s - max).exp();
            if equal_sizes {
                e
            } else {
                d as f64 * e
            }
        })
        .collect();
    let total: f64 = terms.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::NonFinite("fedadp_weights"));
    }
    Ok(AggregationWeights {
        weights: terms.into_iter().map(|e| e / total).collect(),
        strategy: StrategyTag::FedAdp,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChebyshevAudit {
    /// `sum cos(theta_i) * fedadp_weight_i`
    pub lhs: f64,
    /// `sum cos(theta_i) * fedavg_weight_i`
    pub rhs: f64,
}

/// Correlation-weighted sums under FedAdp and FedAvg weights. Because FedAdp
/// weights are ordered like the correlations `cos(theta_i)`, `lhs >= rhs`.
pub fn chebyshev_audit(
    smoothed_angles: &[f64],
    sizes: &[usize],
    alpha: f64,
) -> Result<ChebyshevAudit> {
    let adaptive = fedadp_weights(smoothed_angles, sizes, alpha)?;
    let baseline = fedavg_weights(sizes)?;
    let weighted = |w: &[f64]| {
        smoothed_angles
            .iter()
            .zip(w)
            .fold(0.0, |acc, (theta, psi)| acc + theta.cos() * psi)
    };
    Ok(ChebyshevAudit {
        lhs: weighted(&adaptive.weights),
        rhs: weighted(&baseline.weights),
    })
}

/// Empirical local-dissimilarity bounds `(A, B)`: the smallest and largest
/// ratio of a node's gradient norm to the global gradient norm.
pub fn empirical_dissimilarity(
    grads: &[ParamVector],
    global_grad: &ParamVector,
) -> Result<(f64, f64)> {
    let global = numerics::norm(global_grad);
    if global == 0.0 {
        return Err(Error::DegenerateGeometry("zero global gradient"));
    }
    if grads.is_empty() {
        return Err(Error::State("no node gradients".into()));
    }
    Ok(grads.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), g| {
        let r = numerics::norm(g) / global;
        (lo.min(r), hi.max(r))
    }))
}

/// A rule turning per-node smoothed angles and sizes into aggregation weights.
pub trait Weighting: Send + Sync {
    fn tag(&self) -> StrategyTag;

    fn weights(&self, smoothed_angles: &[f64], sizes: &[usize]) -> Result<AggregationWeights>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct FedAvg;

impl Weighting for FedAvg {
    fn tag(&self) -> StrategyTag {
        StrategyTag::FedAvg
    }

    fn weights(&self, _smoothed_angles: &[f64], sizes: &[usize]) -> Result<AggregationWeights> {
        fedavg_weights(sizes)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FedAdp {
    pub alpha: f64,
}

impl Default for FedAdp {
    fn default() -> Self {
        FedAdp {
            alpha: DEFAULT_ALPHA,
        }
    }
}

impl Weighting for FedAdp {
    fn tag(&self) -> StrategyTag {
        StrategyTag::FedAdp
    }

    fn weights(&self, smoothed_angles: &[f64], sizes: &[usize]) -> Result<AggregationWeights> {
        fedadp_weights(smoothed_angles, sizes, self.alpha)
    }
}

pub fn weighting_for(tag: StrategyTag, alpha: f64) -> Box<dyn Weighting> {
    match tag {
        StrategyTag::FedAvg => Box::new(FedAvg),
        StrategyTag::FedAdp => Box::new(FedAdp { alpha }),
    }
}

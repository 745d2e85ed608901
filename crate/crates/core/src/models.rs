//! Differentiable classifiers over flat parameter vectors.
//!
//! Two architectures: multinomial logistic regression (convex) and a fully
//! connected network with `tanh` hidden units (non-convex). Both end in a
//! softmax and are trained with mean cross-entropy.
//!
//! Parameter layout: for every layer in order, the `fan_out x fan_in` weight
//! matrix (row-major) followed by the `fan_out` bias vector.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::ParamVector;
use crate::seed::{self, Stream};

/// Lower clamp on per-sample log-probabilities, `ln(1e-12)`.
pub const MIN_LOG_PROB: f64 = -27.631_021_115_928_547;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Mlr,
    Mlp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub input_dim: usize,
    pub num_classes: usize,
    pub hidden_dims: Vec<usize>,
}

impl ModelSpec {
    pub fn mlr(input_dim: usize, num_classes: usize) -> Self {
        ModelSpec {
            kind: ModelKind::Mlr,
            input_dim,
            num_classes,
            hidden_dims: Vec::new(),
        }
    }

    pub fn mlp(input_dim: usize, num_classes: usize, hidden_dims: Vec<usize>) -> Self {
        ModelSpec {
            kind: ModelKind::Mlp,
            input_dim,
            num_classes,
            hidden_dims,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::config("model.input_dim", "must be positive"));
        }
        if self.num_classes == 0 {
            return Err(Error::config("model.num_classes", "must be positive"));
        }
        match self.kind {
            ModelKind::Mlr if !self.hidden_dims.is_empty() => Err(Error::config(
                "model.hidden_dims",
                "must be empty for an MLR model",
            )),
            ModelKind::Mlp if self.hidden_dims.is_empty() => Err(Error::config(
                "model.hidden_dims",
                "an MLP needs at least one hidden layer",
            )),
            _ if self.hidden_dims.contains(&0) => Err(Error::config(
                "model.hidden_dims",
                "layer widths must be positive",
            )),
            _ => Ok(()),
        }
    }

    /// `(fan_in, fan_out)` of every layer, input to output.
    pub fn layers(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 2);
        dims.push(self.input_dim);
        dims.extend_from_slice(&self.hidden_dims);
        dims.push(self.num_classes);
        dims.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers()
            .iter()
            .map(|(fan_in, fan_out)| (fan_in + 1) * fan_out)
            .sum()
    }

    fn check_params(&self, w: &ParamVector) -> Result<()> {
        let expected = self.param_count();
        if w.len() != expected {
            return Err(Error::Dimension {
                context: "model parameters",
                expected,
                actual: w.len(),
            });
        }
        Ok(())
    }

    fn check_batch(&self, batch: &Batch) -> Result<()> {
        if batch.input_dim != self.input_dim {
            return Err(Error::Dimension {
                context: "batch features",
                expected: self.input_dim,
                actual: batch.input_dim,
            });
        }
        if let Some(&bad) = batch.labels.iter().find(|&&y| y >= self.num_classes) {
            return Err(Error::Dimension {
                context: "batch label",
                expected: self.num_classes,
                actual: bad,
            });
        }
        Ok(())
    }
}

/// A mini-batch of samples, features stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    features: Vec<f64>,
    input_dim: usize,
    labels: Vec<usize>,
}

impl Batch {
    pub fn new(features: Vec<f64>, input_dim: usize, labels: Vec<usize>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Dimension {
                context: "batch rows",
                expected: 1,
                actual: 0,
            });
        }
        if features.len() != labels.len() * input_dim {
            return Err(Error::Dimension {
                context: "batch features",
                expected: labels.len() * input_dim,
                actual: features.len(),
            });
        }
        Ok(Batch {
            features,
            input_dim,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.input_dim..(i + 1) * self.input_dim]
    }
}

/// MLR: zeros. MLP: each layer uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
pub fn init_params(spec: &ModelSpec, seed: u64) -> ParamVector {
    match spec.kind {
        ModelKind::Mlr => ParamVector::zeros(spec.param_count()),
        ModelKind::Mlp => {
            let mut rng = seed::rng(seed, Stream::ModelInit, &[]);
            let mut values = Vec::with_capacity(spec.param_count());
            for (fan_in, fan_out) in spec.layers() {
                let bound = 1.0 / (fan_in as f64).sqrt();
                for _ in 0..(fan_in + 1) * fan_out {
                    values.push(rng.random_range(-bound..=bound));
                }
            }
            ParamVector::new(values)
        }
    }
}

/// Numerically stable softmax (max subtraction).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Forward pass for one sample, keeping every layer's output.
/// `acts[0]` is the input; `acts.last()` holds the logits.
fn forward(spec: &ModelSpec, w: &[f64], x: &[f64]) -> Vec<Vec<f64>> {
    let layers = spec.layers();
    let mut acts: Vec<Vec<f64>> = Vec::with_capacity(layers.len() + 1);
    acts.push(x.to_vec());
    let mut offset = 0;
    for (l, &(fan_in, fan_out)) in layers.iter().enumerate() {
        let weights = &w[offset..offset + fan_in * fan_out];
        let bias = &w[offset + fan_in * fan_out..offset + (fan_in + 1) * fan_out];
        offset += (fan_in + 1) * fan_out;
        let input = &acts[l];
        let hidden = l + 1 < layers.len();
        let out: Vec<f64> = (0..fan_out)
            .map(|j| {
                let row = &weights[j * fan_in..(j + 1) * fan_in];
                let z = row.iter().zip(input).fold(bias[j], |acc, (a, b)| acc + a * b);
                if hidden {
                    z.tanh()
                } else {
                    z
                }
            })
            .collect();
        acts.push(out);
    }
    acts
}

/// Clamped log-probability of `label` under `logits`.
fn log_prob(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    (logits[label] - max - lse).max(MIN_LOG_PROB)
}

pub fn logits(spec: &ModelSpec, w: &ParamVector, x: &[f64]) -> Result<Vec<f64>> {
    spec.check_params(w)?;
    if x.len() != spec.input_dim {
        return Err(Error::Dimension {
            context: "sample features",
            expected: spec.input_dim,
            actual: x.len(),
        });
    }
    Ok(forward(spec, w, x).pop().unwrap_or_default())
}

/// Mean cross-entropy of the batch at `w`.
pub fn loss(spec: &ModelSpec, w: &ParamVector, batch: &Batch) -> Result<f64> {
    spec.check_params(w)?;
    spec.check_batch(batch)?;
    let total = (0..batch.len()).fold(0.0, |acc, i| {
        let acts = forward(spec, w, batch.row(i));
        acc - log_prob(acts.last().expect("output layer"), batch.labels[i])
    });
    Ok(total / batch.len() as f64)
}

/// Analytic gradient of [`loss`] by backpropagation.
///
/// Samples whose log-probability sits on the clamp contribute zero, which is
/// the exact derivative of the clamped loss there.
pub fn gradient(spec: &ModelSpec, w: &ParamVector, batch: &Batch) -> Result<ParamVector> {
    spec.check_params(w)?;
    spec.check_batch(batch)?;
    let layers = spec.layers();
    let mut offsets = Vec::with_capacity(layers.len());
    let mut offset = 0;
    for &(fan_in, fan_out) in &layers {
        offsets.push(offset);
        offset += (fan_in + 1) * fan_out;
    }

    let mut grad = vec![0.0; offset];
    for i in 0..batch.len() {
        let acts = forward(spec, w, batch.row(i));
        let logits = acts.last().expect("output layer");
        let label = batch.labels[i];
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        if logits[label] - max - sum.ln() < MIN_LOG_PROB {
            continue;
        }
        let mut delta: Vec<f64> = exps.iter().map(|e| e / sum).collect();
        delta[label] -= 1.0;

        for l in (0..layers.len()).rev() {
            let (fan_in, fan_out) = layers[l];
            let base = offsets[l];
            let input = &acts[l];
            for j in 0..fan_out {
                let d = delta[j];
                let row = &mut grad[base + j * fan_in..base + (j + 1) * fan_in];
                for (g, a) in row.iter_mut().zip(input) {
                    *g += d * a;
                }
                grad[base + fan_in * fan_out + j] += d;
            }
            if l > 0 {
                let weights = &w[base..base + fan_in * fan_out];
                delta = (0..fan_in)
                    .map(|k| {
                        let back = (0..fan_out)
                            .fold(0.0, |acc, j| acc + weights[j * fan_in + k] * delta[j]);
                        back * (1.0 - input[k] * input[k])
                    })
                    .collect();
            }
        }
    }
    let scale = 1.0 / batch.len() as f64;
    for g in &mut grad {
        *g *= scale;
    }
    Ok(ParamVector::new(grad))
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Fraction of samples whose predicted class equals the label.
pub fn accuracy(spec: &ModelSpec, w: &ParamVector, batch: &Batch) -> Result<f64> {
    spec.check_params(w)?;
    spec.check_batch(batch)?;
    let correct = (0..batch.len())
        .filter(|&i| {
            let acts = forward(spec, w, batch.row(i));
            argmax(acts.last().expect("output layer")) == batch.labels[i]
        })
        .count();
    Ok(correct as f64 / batch.len() as f64)
}

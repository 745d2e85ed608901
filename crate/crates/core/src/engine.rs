//! Synchronous federated round loop.
//!
//! Each round: broadcast `w(t-1)`, let every participating node run local
//! mini-batch SGD, recover pseudo-gradients `-delta_i / eta` from the uploaded
//! deltas, weight the deltas with the configured [`Weighting`], and apply
//! `w(t) = w(t-1) + sum_i psi_i * delta_i`.
//!
//! Node training runs on the ambient rayon pool. Each node draws from its own
//! `(seed, node, round)` stream and results are collected in node order, so
//! the thread count never changes the output.

use std::f64::consts::FRAC_PI_2;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregation::{self, AggregationWeights, StrategyTag, Weighting};
use crate::data::{self, Dataset, NodePartition, PartitionPlan};
use crate::error::{Error, Result};
use crate::metrics;
use crate::models::{self, Batch, ModelSpec};
use crate::numerics::{self, ParamVector};
use crate::seed::{self, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub eta0: f64,
    pub decay: f64,
    pub local_epochs: usize,
    pub batch_size: usize,
    pub rounds: usize,
    pub alpha: f64,
    pub strategy: StrategyTag,
    pub seed: u64,
    /// Nodes sampled per round; `None` means every node participates.
    pub clients_per_round: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            eta0: 0.01,
            decay: 0.995,
            local_epochs: 1,
            batch_size: 50,
            rounds: 300,
            alpha: aggregation::DEFAULT_ALPHA,
            strategy: StrategyTag::FedAdp,
            seed: 0,
            clients_per_round: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |key: &str, msg: &str| Err(Error::config(format!("train.{key}"), msg));
        if !(self.eta0 > 0.0 && self.eta0.is_finite()) {
            return fail("eta0", "must be a positive finite number");
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return fail("decay", "must lie in (0, 1]");
        }
        if self.local_epochs == 0 {
            return fail("local_epochs", "must be at least 1");
        }
        if self.batch_size == 0 {
            return fail("batch_size", "must be at least 1");
        }
        if self.rounds == 0 {
            return fail("rounds", "must be at least 1");
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return fail("alpha", "must be a positive finite number");
        }
        if self.clients_per_round == Some(0) {
            return fail("clients_per_round", "must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NodeRoundState {
    pub node_id: usize,
    pub smoothed_angle: Option<f64>,
    pub participation_count: usize,
    pub last_delta: Option<ParamVector>,
}

/// Everything logged for one communication round. Per-node vectors are
/// aligned with `participants`.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub eta: f64,
    pub participants: Vec<usize>,
    pub weights: AggregationWeights,
    pub instantaneous_angles: Vec<f64>,
    pub smoothed_angles: Vec<f64>,
    pub global_grad_norm: f64,
    pub train_loss: f64,
    pub test_loss: f64,
    pub test_accuracy: f64,
    pub divergence: f64,
    pub chebyshev_lhs: f64,
    pub chebyshev_rhs: f64,
    /// `None` when the global gradient vanished.
    pub empirical_a: Option<f64>,
    pub empirical_b: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalUpdate {
    pub delta: ParamVector,
    pub steps: usize,
}

/// `E` epochs of mini-batch SGD from `w_global` on the node's data with a
/// fixed step size. Returns `w_local - w_global` and the number of steps.
#[allow(clippy::too_many_arguments)]
pub fn local_update(
    spec: &ModelSpec,
    ds: &Dataset,
    w_global: &ParamVector,
    part: &NodePartition,
    eta: f64,
    epochs: usize,
    batch_size: usize,
    round_seed: u64,
) -> Result<LocalUpdate> {
    if eta.is_nan() || eta <= 0.0 {
        return Err(Error::config("train.eta0", "learning rate must be positive"));
    }
    let mut w = w_global.clone();
    let mut steps = 0;
    for epoch in 0..epochs {
        let epoch_seed = seed::derive(round_seed, Stream::Batches, &[epoch as u64]);
        for batch in data::batches(ds, part, batch_size, epoch_seed)? {
            let g = models::gradient(spec, &w, &batch)?;
            w.axpy(-eta, &g)?;
            steps += 1;
        }
    }
    if !w.is_finite() {
        return Err(Error::NonFinite("local_update"));
    }
    Ok(LocalUpdate {
        delta: w.sub(w_global)?,
        steps,
    })
}

/// Pseudo-gradients `-delta_i / eta`.
pub fn recover_gradients(deltas: &[ParamVector], eta: f64) -> Vec<ParamVector> {
    deltas
        .iter()
        .map(|d| ParamVector::new(d.iter().map(|v| -v / eta).collect()))
        .collect()
}

/// Size-weighted mean of node gradients.
pub fn global_gradient(grads: &[ParamVector], sizes: &[usize]) -> Result<ParamVector> {
    weighted_sum(grads, &aggregation::fedavg_weights(sizes)?.weights)
}

/// `sum_i weights[i] * vectors[i]`, accumulated in node order.
pub fn weighted_sum(vectors: &[ParamVector], weights: &[f64]) -> Result<ParamVector> {
    let first = vectors
        .first()
        .ok_or_else(|| Error::State("no vectors to combine".into()))?;
    if weights.len() != vectors.len() {
        return Err(Error::Dimension {
            context: "aggregation weights",
            expected: vectors.len(),
            actual: weights.len(),
        });
    }
    let mut out = ParamVector::zeros(first.len());
    for (v, &w) in vectors.iter().zip(weights) {
        out.axpy(w, v)?;
    }
    Ok(out)
}

/// One simulated federation: model, node data, per-node angle state.
pub struct Simulation<'a> {
    spec: ModelSpec,
    train: &'a Dataset,
    nodes: Vec<NodePartition>,
    node_batches: Vec<Batch>,
    test_batch: Batch,
    config: TrainConfig,
    weighting: Box<dyn Weighting>,
    global: ParamVector,
    states: Vec<NodeRoundState>,
    eta: f64,
    completed: usize,
}

impl<'a> Simulation<'a> {
    /// Simulation using the strategy named in `config`.
    pub fn new(
        spec: ModelSpec,
        train: &'a Dataset,
        test: &Dataset,
        nodes: Vec<NodePartition>,
        config: TrainConfig,
    ) -> Result<Self> {
        let weighting = aggregation::weighting_for(config.strategy, config.alpha);
        Self::with_weighting(spec, train, test, nodes, config, weighting)
    }

    pub fn with_weighting(
        spec: ModelSpec,
        train: &'a Dataset,
        test: &Dataset,
        nodes: Vec<NodePartition>,
        config: TrainConfig,
        weighting: Box<dyn Weighting>,
    ) -> Result<Self> {
        spec.validate()?;
        config.validate()?;
        if nodes.is_empty() {
            return Err(Error::config("partition.nodes", "at least one node is required"));
        }
        for (ds, key) in [(train, "train"), (test, "test")] {
            if ds.input_dim() != spec.input_dim {
                return Err(Error::config(
                    "model.input_dim",
                    format!(
                        "{} does not match the {key} data dimension {}",
                        spec.input_dim,
                        ds.input_dim()
                    ),
                ));
            }
        }
        if let Some(k) = config.clients_per_round {
            if k > nodes.len() {
                return Err(Error::config(
                    "train.clients_per_round",
                    format!("{k} exceeds the {} available nodes", nodes.len()),
                ));
            }
        }
        let node_batches = nodes
            .iter()
            .map(|p| train.gather(p.indices()))
            .collect::<Result<Vec<_>>>()?;
        let states = nodes
            .iter()
            .map(|p| NodeRoundState {
                node_id: p.node_id,
                ..NodeRoundState::default()
            })
            .collect();
        Ok(Simulation {
            global: models::init_params(&spec, config.seed),
            eta: config.eta0,
            spec,
            train,
            nodes,
            node_batches,
            test_batch: test.as_batch()?,
            config,
            weighting,
            states,
            completed: 0,
        })
    }

    pub fn global_model(&self) -> &ParamVector {
        &self.global
    }

    pub fn node_states(&self) -> &[NodeRoundState] {
        &self.states
    }

    pub fn nodes(&self) -> &[NodePartition] {
        &self.nodes
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn strategy(&self) -> StrategyTag {
        self.weighting.tag()
    }

    fn participants(&self, round: usize) -> Vec<usize> {
        match self.config.clients_per_round {
            Some(k) if k < self.nodes.len() => {
                let mut rng = seed::rng(self.config.seed, Stream::Participation, &[round as u64]);
                let mut chosen = index::sample(&mut rng, self.nodes.len(), k).into_vec();
                chosen.sort_unstable();
                chosen
            }
            _ => (0..self.nodes.len()).collect(),
        }
    }

    /// Execute round `t`; rounds must run in order starting from 1.
    pub fn run_round(&mut self, t: usize) -> Result<RoundRecord> {
        if t != self.completed + 1 {
            return Err(Error::State(format!(
                "round {t} requested but {} rounds have completed",
                self.completed
            )));
        }
        if t > 1 {
            self.eta *= self.config.decay;
        }
        let eta = self.eta;
        let participants = self.participants(t);

        let updates = participants
            .par_iter()
            .map(|&i| {
                let part = &self.nodes[i];
                let round_seed =
                    seed::derive(self.config.seed, Stream::Batches, &[part.node_id as u64, t as u64]);
                local_update(
                    &self.spec,
                    self.train,
                    &self.global,
                    part,
                    eta,
                    self.config.local_epochs,
                    self.config.batch_size,
                    round_seed,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let deltas: Vec<ParamVector> = updates.into_iter().map(|u| u.delta).collect();
        let sizes: Vec<usize> = participants.iter().map(|&i| self.nodes[i].size()).collect();

        let grads = recover_gradients(&deltas, eta);
        let global_grad = global_gradient(&grads, &sizes)?;
        let global_norm = numerics::norm(&global_grad);

        let mut instantaneous = Vec::with_capacity(participants.len());
        let mut smoothed = Vec::with_capacity(participants.len());
        for (k, &i) in participants.iter().enumerate() {
            let theta = match aggregation::instantaneous_angle(&global_grad, &grads[k]) {
                Ok(theta) => theta,
                Err(Error::DegenerateGeometry(_)) => FRAC_PI_2,
                Err(e) => return Err(e),
            };
            let state = &mut self.states[i];
            state.participation_count += 1;
            let s = aggregation::update_smoothed_angle(
                state.smoothed_angle,
                theta,
                state.participation_count,
            )?;
            state.smoothed_angle = Some(s);
            state.last_delta = Some(deltas[k].clone());
            instantaneous.push(theta);
            smoothed.push(s);
        }

        let weights = self.weighting.weights(&smoothed, &sizes)?;
        let step = weighted_sum(&deltas, &weights.weights)?;
        self.global.axpy(1.0, &step)?;
        if !self.global.is_finite() {
            return Err(Error::NonFinite("global model"));
        }
        self.completed = t;

        let audit = aggregation::chebyshev_audit(&smoothed, &sizes, self.config.alpha)?;
        let (empirical_a, empirical_b) = match aggregation::empirical_dissimilarity(&grads, &global_grad) {
            Ok((a, b)) => (Some(a), Some(b)),
            Err(Error::DegenerateGeometry(_)) => (None, None),
            Err(e) => return Err(e),
        };

        Ok(RoundRecord {
            round: t,
            eta,
            participants,
            weights,
            instantaneous_angles: instantaneous,
            smoothed_angles: smoothed,
            global_grad_norm: global_norm,
            train_loss: self.train_loss()?,
            test_loss: models::loss(&self.spec, &self.global, &self.test_batch)?,
            test_accuracy: models::accuracy(&self.spec, &self.global, &self.test_batch)?,
            divergence: metrics::divergence(&grads, &global_grad)?,
            chebyshev_lhs: audit.lhs,
            chebyshev_rhs: audit.rhs,
            empirical_a,
            empirical_b,
        })
    }

    /// Size-weighted mean of every node's local loss at the current model.
    pub fn train_loss(&self) -> Result<f64> {
        let losses = self
            .node_batches
            .par_iter()
            .map(|b| models::loss(&self.spec, &self.global, b))
            .collect::<Result<Vec<_>>>()?;
        let total: usize = self.nodes.iter().map(NodePartition::size).sum();
        Ok(losses
            .iter()
            .zip(&self.nodes)
            .fold(0.0, |acc, (l, p)| acc + p.size() as f64 / total as f64 * l))
    }

    /// Run the remaining rounds up to `config.rounds`.
    pub fn run(&mut self) -> Result<Vec<RoundRecord>> {
        (self.completed + 1..=self.config.rounds)
            .map(|t| self.run_round(t))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub strategy: StrategyTag,
    pub records: Vec<RoundRecord>,
    /// First round reaching each requested target, in request order.
    pub rounds_to_target: Vec<(f64, Option<usize>)>,
    pub final_model: ParamVector,
}

/// Partition `train` by `plan`, then run `config.rounds` rounds with full
/// participation unless `config.clients_per_round` says otherwise.
pub fn run_experiment(
    train: &Dataset,
    test: &Dataset,
    plan: &PartitionPlan,
    spec: &ModelSpec,
    config: &TrainConfig,
    targets: &[f64],
) -> Result<ExperimentResult> {
    let nodes = data::partition(train, plan)?;
    let mut sim = Simulation::new(spec.clone(), train, test, nodes, config.clone())?;
    let records = sim.run()?;
    Ok(ExperimentResult {
        strategy: config.strategy,
        rounds_to_target: targets
            .iter()
            .map(|&target| (target, metrics::rounds_to_target(&records, target)))
            .collect(),
        final_model: sim.global_model().clone(),
        records,
    })
}

//! Deterministic simulator of synchronous federated learning.
//!
//! Nodes train a shared model on local (possibly label-skewed) partitions and
//! upload model deltas. The server recovers per-node pseudo-gradients and
//! aggregates the deltas with either data-size weights (FedAvg) or adaptive
//! weights derived from the smoothed angle between each node's gradient and
//! the global gradient (FedAdp).
//!
//! Every random choice is drawn from a stream keyed by `(seed, node, round)`,
//! so results do not depend on the number of worker threads.

pub mod aggregation;
pub mod cli;
pub mod data;
pub mod engine;
pub mod error;
pub mod metrics;
pub mod models;
pub mod numerics;
pub mod seed;

pub use error::{Error, Result};
pub use numerics::ParamVector;

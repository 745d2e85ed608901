//! IID and x-class non-IID node partitioning.
//!
//! Every node samples independently (from its own seeded stream), so two
//! nodes may share samples and non-IID nodes may share classes.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::{Dataset, NodePartition};
use crate::error::{Error, Result};
use crate::seed::{self, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeSetting {
    Iid,
    /// Samples restricted to `x` randomly chosen classes.
    NonIid(usize),
}

impl fmt::Display for NodeSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeSetting::Iid => write!(f, "IID"),
            NodeSetting::NonIid(x) => write!(f, "NonIID({x})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub setting: NodeSetting,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionPlan {
    pub node_specs: Vec<NodeSpec>,
    pub seed: u64,
}

/// Parse one shorthand term such as `5IID`, `NonIID(2)` or `7NonIID(1)`.
fn parse_term(term: &str) -> Option<(usize, NodeSetting)> {
    let digits = term.chars().take_while(char::is_ascii_digit).count();
    let count = if digits == 0 {
        1
    } else {
        term[..digits].parse().ok()?
    };
    let rest = term[digits..].trim();
    if rest.eq_ignore_ascii_case("iid") {
        return Some((count, NodeSetting::Iid));
    }
    let lower = rest.to_ascii_lowercase();
    let inner = lower.strip_prefix("noniid(")?.strip_suffix(')')?;
    Some((count, NodeSetting::NonIid(inner.trim().parse().ok()?)))
}

impl FromStr for NodeSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match parse_term(s.trim()) {
            Some((1, setting)) if !s.trim().starts_with(|c: char| c.is_ascii_digit()) => {
                Ok(setting)
            }
            _ => Err(Error::config(
                "partition.setting",
                format!("`{s}` is not `IID` or `NonIID(x)`"),
            )),
        }
    }
}

impl PartitionPlan {
    /// Build a plan from shorthand like `"5IID+5NonIID(1)"`, every node
    /// holding `samples` samples.
    pub fn from_shorthand(shorthand: &str, samples: usize, seed: u64) -> Result<Self> {
        let mut node_specs = Vec::new();
        for term in shorthand.split('+') {
            let (count, setting) = parse_term(term.trim()).ok_or_else(|| {
                Error::config(
                    "partition.nodes",
                    format!("cannot parse `{}` in `{shorthand}`", term.trim()),
                )
            })?;
            node_specs.extend(std::iter::repeat_n(NodeSpec { setting, samples }, count));
        }
        let plan = PartitionPlan { node_specs, seed };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.node_specs.is_empty() {
            return Err(Error::config("partition.nodes", "at least one node is required"));
        }
        for (i, spec) in self.node_specs.iter().enumerate() {
            if spec.samples == 0 {
                return Err(Error::config(
                    "partition.samples_per_node",
                    format!("node {i} has zero samples"),
                ));
            }
            if spec.setting == NodeSetting::NonIid(0) {
                return Err(Error::config(
                    "partition.nodes",
                    format!("node {i}: NonIID(x) needs x >= 1"),
                ));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.node_specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_specs.is_empty()
    }
}

pub fn partition(ds: &Dataset, plan: &PartitionPlan) -> Result<Vec<NodePartition>> {
    plan.validate()?;
    let by_class = ds.indices_by_class();
    let num_classes = ds.num_classes();

    plan.node_specs
        .iter()
        .enumerate()
        .map(|(node, spec)| {
            let mut rng = seed::rng(plan.seed, Stream::Partition, &[node as u64]);
            let mut indices = match spec.setting {
                NodeSetting::Iid => {
                    if spec.samples > ds.len() {
                        return Err(Error::InfeasiblePartition {
                            node,
                            message: format!(
                                "requests {} IID samples from a dataset of {}",
                                spec.samples,
                                ds.len()
                            ),
                        });
                    }
                    index::sample(&mut rng, ds.len(), spec.samples).into_vec()
                }
                NodeSetting::NonIid(x) => {
                    if x > num_classes {
                        return Err(Error::InfeasiblePartition {
                            node,
                            message: format!(
                                "NonIID({x}) exceeds the {num_classes} available classes"
                            ),
                        });
                    }
                    let mut classes = index::sample(&mut rng, num_classes, x).into_vec();
                    classes.sort_unstable();
                    let pool: Vec<usize> = classes
                        .iter()
                        .flat_map(|&c| by_class[c].iter().copied())
                        .collect();
                    if spec.samples > pool.len() {
                        let counts: Vec<String> = classes
                            .iter()
                            .map(|&c| format!("class {c} has {}", by_class[c].len()))
                            .collect();
                        return Err(Error::InfeasiblePartition {
                            node,
                            message: format!(
                                "requests {} samples but {}",
                                spec.samples,
                                counts.join(", ")
                            ),
                        });
                    }
                    index::sample(&mut rng, pool.len(), spec.samples)
                        .into_iter()
                        .map(|k| pool[k])
                        .collect()
                }
            };
            indices.sort_unstable();
            Ok(NodePartition::new(node, spec.setting, indices))
        })
        .collect()
}

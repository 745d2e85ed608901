//! Datasets, node partitions, and mini-batching.

mod idx;
mod partition;
mod synthetic;

use rand::seq::SliceRandom;

pub use idx::{load_idx, read_idx_images, read_idx_labels, write_idx, IMAGES_MAGIC, LABELS_MAGIC};
pub use partition::{partition, NodeSetting, NodeSpec, PartitionPlan};
pub use synthetic::{generate_synthetic, generate_synthetic_split, SYNTHETIC_SIGMA};

use crate::error::{Error, Result};
use crate::models::Batch;
use crate::seed::{self, Stream};

/// Labelled samples with features in `[0, 1]`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    input_dim: usize,
    labels: Vec<usize>,
    num_classes: usize,
}

impl Dataset {
    pub fn new(
        features: Vec<f64>,
        input_dim: usize,
        labels: Vec<usize>,
        num_classes: usize,
    ) -> Result<Self> {
        if features.len() != labels.len() * input_dim {
            return Err(Error::Dimension {
                context: "dataset features",
                expected: labels.len() * input_dim,
                actual: features.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::Dimension {
                context: "dataset label",
                expected: num_classes,
                actual: bad,
            });
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dataset features"));
        }
        Ok(Dataset {
            features,
            input_dim,
            labels,
            num_classes,
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

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.input_dim..(i + 1) * self.input_dim]
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Indices of every sample, grouped per class in ascending order.
    pub fn indices_by_class(&self) -> Vec<Vec<usize>> {
        let mut by_class = vec![Vec::new(); self.num_classes];
        for (i, &y) in self.labels.iter().enumerate() {
            by_class[y].push(i);
        }
        by_class
    }

    /// Training sets must cover every class at least once.
    pub fn check_all_classes_present(&self) -> Result<()> {
        match self.class_counts().iter().position(|&c| c == 0) {
            Some(c) => Err(Error::State(format!(
                "class {c} has no samples in the training dataset"
            ))),
            None => Ok(()),
        }
    }

    pub fn gather(&self, indices: &[usize]) -> Result<Batch> {
        let mut features = Vec::with_capacity(indices.len() * self.input_dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Batch::new(features, self.input_dim, labels)
    }

    pub fn as_batch(&self) -> Result<Batch> {
        Batch::new(self.features.clone(), self.input_dim, self.labels.clone())
    }
}

/// One node's local data: indices into the shared training set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodePartition {
    pub node_id: usize,
    pub setting: NodeSetting,
    indices: Vec<usize>,
}

impl NodePartition {
    pub fn new(node_id: usize, setting: NodeSetting, indices: Vec<usize>) -> Self {
        NodePartition {
            node_id,
            setting,
            indices,
        }
    }

    /// `D_i`, the local sample count.
    pub fn size(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Sorted distinct labels present on this node.
    pub fn label_support(&self, ds: &Dataset) -> Vec<usize> {
        let mut labels: Vec<usize> = self.indices.iter().map(|&i| ds.labels()[i]).collect();
        labels.sort_unstable();
        labels.dedup();
        labels
    }
}

/// Number of mini-batches per epoch, `ceil(D_i / batch_size)`.
pub fn batches_per_epoch(size: usize, batch_size: usize) -> usize {
    size.div_ceil(batch_size)
}

/// Shuffle the node's indices with `epoch_seed` and chunk them into batches
/// of `batch_size`; the final chunk may be short.
pub fn batch_indices(part: &NodePartition, batch_size: usize, epoch_seed: u64) -> Vec<Vec<usize>> {
    assert!(batch_size >= 1, "batch size must be positive");
    let mut order = part.indices.clone();
    let mut rng = seed::rng(epoch_seed, Stream::Batches, &[]);
    order.shuffle(&mut rng);
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

pub fn batches(
    ds: &Dataset,
    part: &NodePartition,
    batch_size: usize,
    epoch_seed: u64,
) -> Result<Vec<Batch>> {
    if batch_size == 0 {
        return Err(Error::config("train.batch_size", "must be at least 1"));
    }
    batch_indices(part, batch_size, epoch_seed)
        .iter()
        .map(|chunk| ds.gather(chunk))
        .collect()
}

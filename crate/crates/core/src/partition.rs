use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A node-to-group assignment. Labels need not be contiguous.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Partition {
    labels: Vec<u32>,
}

impl Partition {
    pub fn new(labels: Vec<u32>) -> Self {
        Partition { labels }
    }

    pub fn single_group(n: usize) -> Self {
        Partition { labels: vec![0; n] }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label(&self, v: u32) -> u32 {
        self.labels[v as usize]
    }

    /// Sizes indexed by label, including zeros for unused labels.
    pub fn label_sizes(&self) -> Vec<u64> {
        let max = self.labels.iter().copied().max().map_or(0, |m| m as usize + 1);
        let mut sizes = vec![0u64; max];
        for &r in &self.labels {
            sizes[r as usize] += 1;
        }
        sizes
    }

    /// Sizes of the nonempty groups, in label order.
    pub fn group_sizes(&self) -> Vec<u64> {
        self.label_sizes().into_iter().filter(|&s| s > 0).collect()
    }

    pub fn num_groups(&self) -> usize {
        self.group_sizes().len()
    }

    /// Relabels groups 0, 1, ... in order of first appearance.
    pub fn canonical(&self) -> Partition {
        let mut map = rustc_hash::FxHashMap::default();
        let labels = self
            .labels
            .iter()
            .map(|&r| {
                let next = map.len() as u32;
                *map.entry(r).or_insert(next)
            })
            .collect();
        Partition { labels }
    }

    pub fn check_len(&self, n: usize) -> Result<()> {
        if self.labels.len() != n {
            return Err(Error::Argument(format!("partition covers {} nodes, graph has {n}", self.labels.len())));
        }
        Ok(())
    }
}

impl From<Vec<u32>> for Partition {
    fn from(labels: Vec<u32>) -> Self {
        Partition { labels }
    }
}

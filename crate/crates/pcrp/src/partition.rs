//! A labeling of `n` points into clusters with dense ids `0..K-1`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    labels: Vec<usize>,
    n_clusters: usize,
}

impl Partition {
    /// Accepts only dense labelings: the set of ids used must be exactly
    /// `{0..K-1}`.
    pub fn new(labels: Vec<usize>) -> Result<Self> {
        let k = labels.iter().map(|&l| l + 1).max().unwrap_or(0);
        let mut seen = vec![false; k];
        for &l in &labels {
            seen[l] = true;
        }
        if seen.iter().any(|&s| !s) {
            return Err(Error::Input("cluster ids are not dense".into()));
        }
        Ok(Self { labels, n_clusters: k })
    }

    /// Relabels arbitrary ids by order of first appearance, producing a dense
    /// labeling.
    pub fn from_raw_labels<T: Eq + std::hash::Hash + Copy>(raw: &[T]) -> Self {
        let mut map = std::collections::HashMap::new();
        let labels: Vec<usize> = raw
            .iter()
            .map(|&l| {
                let next = map.len();
                *map.entry(l).or_insert(next)
            })
            .collect();
        let n_clusters = map.len();
        Self { labels, n_clusters }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    /// Cluster populations indexed by label.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.n_clusters];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }
}

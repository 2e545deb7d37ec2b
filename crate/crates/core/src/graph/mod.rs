//! Population graphs: subjects as nodes with feature vectors and labels,
//! similarity edges, and transductive train/val/test masks.

mod csv;
mod homophily;
mod io;
mod knn;
mod split;
mod stats;
mod synthetic;

pub use self::csv::{load_csv, CsvOptions};
pub use homophily::{edge_homophily, node_homophily};
pub use io::{read_edge_list, read_graph_dir, write_edge_list, write_graph_dir, GraphSidecar};
pub use knn::{build_knn_graph, Metric};
pub use split::{assign_splits, split_counts, SplitSpec};
pub use stats::{graph_stats, GraphStats};
pub use synthetic::{generate_synthetic, SyntheticGraph, SyntheticProvenance, SyntheticSpec};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Transductive node masks. A node is in at most one of the three sets.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Masks {
    pub train: Vec<bool>,
    pub val: Vec<bool>,
    pub test: Vec<bool>,
}

impl Masks {
    pub fn unassigned(n: usize) -> Self {
        Self {
            train: vec![false; n],
            val: vec![false; n],
            test: vec![false; n],
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.train.len() != n || self.val.len() != n || self.test.len() != n {
            return Err(Error::InvalidGraph(format!("masks must have length {n}")));
        }
        for i in 0..n {
            let hits = self.train[i] as u8 + self.val[i] as u8 + self.test[i] as u8;
            if hits > 1 {
                return Err(Error::InvalidGraph(format!("node {i} is in more than one mask")));
            }
        }
        Ok(())
    }
}

pub(crate) fn mask_indices(mask: &[bool]) -> Vec<usize> {
    mask.iter()
        .enumerate()
        .filter_map(|(i, &m)| m.then_some(i))
        .collect()
}

/// Undirected graph with per-node features, labels and masks. Adjacency is
/// stored in CSR form with every edge present in both directions, sorted
/// neighbor lists and no self-loops.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationGraph {
    features: Matrix,
    labels: Vec<usize>,
    num_classes: usize,
    indptr: Vec<usize>,
    neighbors: Vec<usize>,
    masks: Masks,
}

impl PopulationGraph {
    /// Edgeless graph. `num_classes` must exceed every label.
    pub fn new(features: Matrix, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        let n = features.rows();
        if labels.len() != n {
            return Err(Error::InvalidGraph(format!(
                "{} labels for {n} feature rows",
                labels.len()
            )));
        }
        if features.cols() == 0 {
            return Err(Error::InvalidGraph("feature dimension must be at least 1".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::InvalidGraph(format!(
                "label {bad} outside {num_classes} classes"
            )));
        }
        Ok(Self {
            features,
            labels,
            num_classes,
            indptr: vec![0; n + 1],
            neighbors: Vec::new(),
            masks: Masks::unassigned(n),
        })
    }

    /// Replaces the edge set with the union-symmetrization of `edges`.
    /// Duplicates collapse; self-loops are rejected.
    pub fn with_edges(mut self, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let n = self.num_nodes();
        let mut lists: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidGraph(format!("edge ({u}, {v}) out of range")));
            }
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop at node {u}")));
            }
            lists[u].push(v);
            lists[v].push(u);
        }
        let mut indptr = Vec::with_capacity(n + 1);
        let mut neighbors = Vec::new();
        indptr.push(0);
        for mut list in lists {
            list.sort_unstable();
            list.dedup();
            neighbors.extend(list);
            indptr.push(neighbors.len());
        }
        self.indptr = indptr;
        self.neighbors = neighbors;
        Ok(self)
    }

    pub fn with_masks(mut self, masks: Masks) -> Result<Self> {
        masks.validate(self.num_nodes())?;
        self.masks = masks;
        Ok(self)
    }

    pub fn num_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn feat_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn masks(&self) -> &Masks {
        &self.masks
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[self.indptr[v]..self.indptr[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.indptr[v + 1] - self.indptr[v]
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.neighbors.len() / 2
    }

    /// Undirected edges, each once as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_nodes())
            .flat_map(move |u| self.neighbors(u).iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    pub fn train_nodes(&self) -> Vec<usize> {
        mask_indices(&self.masks.train)
    }

    pub fn val_nodes(&self) -> Vec<usize> {
        mask_indices(&self.masks.val)
    }

    pub fn test_nodes(&self) -> Vec<usize> {
        mask_indices(&self.masks.test)
    }

    /// Full scan of the structural invariants: symmetric, self-loop free,
    /// sorted neighbor lists.
    pub fn check_invariants(&self) -> Result<()> {
        for u in 0..self.num_nodes() {
            let nb = self.neighbors(u);
            if nb.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidGraph(format!("neighbors of {u} not strictly sorted")));
            }
            for &v in nb {
                if v == u {
                    return Err(Error::InvalidGraph(format!("self-loop at {u}")));
                }
                if !self.has_edge(v, u) {
                    return Err(Error::InvalidGraph(format!("edge ({u}, {v}) has no reverse")));
                }
            }
        }
        self.masks.validate(self.num_nodes())
    }

    /// Node-permuted copy: node `i` of `self` becomes node `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.num_nodes();
        if perm.len() != n {
            return Err(Error::InvalidParameter("permutation length".into()));
        }
        let mut features = Matrix::zeros(n, self.feat_dim());
        let mut labels = vec![0; n];
        let mut masks = Masks::unassigned(n);
        for (old, &new) in perm.iter().enumerate() {
            features.row_mut(new).copy_from_slice(self.features.row(old));
            labels[new] = self.labels[old];
            masks.train[new] = self.masks.train[old];
            masks.val[new] = self.masks.val[old];
            masks.test[new] = self.masks.test[old];
        }
        let edges: Vec<_> = self.edges().map(|(u, v)| (perm[u], perm[v])).collect();
        Self::new(features, labels, self.num_classes)?
            .with_edges(edges)?
            .with_masks(masks)
    }

    pub fn with_features(mut self, features: Matrix) -> Result<Self> {
        if features.rows() != self.num_nodes() || features.cols() == 0 {
            return Err(Error::Shape("replacement features have the wrong shape".into()));
        }
        self.features = features;
        Ok(self)
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.num_nodes() || labels.iter().any(|&y| y >= self.num_classes) {
            return Err(Error::InvalidGraph("replacement labels invalid".into()));
        }
        self.labels = labels;
        Ok(self)
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn graph_with_labels(labels: &[usize], edges: &[(usize, usize)]) -> PopulationGraph {
        let n = labels.len();
        let features = Matrix::from_vec(n, 1, (0..n).map(|i| i as f64).collect()).unwrap();
        let classes = labels.iter().max().map_or(1, |m| m + 1);
        PopulationGraph::new(features, labels.to_vec(), classes)
            .unwrap()
            .with_edges(edges.iter().copied())
            .unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::graph_with_labels;
    use super::*;

    #[test]
    fn edges_are_symmetrized_and_deduplicated() {
        let g = graph_with_labels(&[0, 0, 1], &[(0, 1), (1, 0), (2, 1)]);
        assert_eq!(g.num_edges(), 2);
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1), (1, 2)]);
        assert!(g.has_edge(2, 1));
        g.check_invariants().unwrap();
    }

    #[test]
    fn self_loops_rejected() {
        let features = Matrix::zeros(2, 1);
        let g = PopulationGraph::new(features, vec![0, 1], 2).unwrap();
        assert!(g.with_edges([(1, 1)]).is_err());
    }

    #[test]
    fn overlapping_masks_rejected() {
        let g = graph_with_labels(&[0, 1], &[]);
        let mut masks = Masks::unassigned(2);
        masks.train[0] = true;
        masks.test[0] = true;
        assert!(g.with_masks(masks).is_err());
    }

    #[test]
    fn labels_must_be_in_range() {
        assert!(PopulationGraph::new(Matrix::zeros(2, 1), vec![0, 2], 2).is_err());
        assert!(PopulationGraph::new(Matrix::zeros(2, 0), vec![0, 1], 2).is_err());
    }
}

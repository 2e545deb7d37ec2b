use std::collections::VecDeque;

use crate::dp::SampledSubgraph;
use crate::graph::PopulationGraph;
use crate::tensor::{Matrix, SparseMatrix};

/// Propagation operator `Â = D̃^{-1/2}(A+I)D̃^{-1/2}` and the input features it
/// acts on. Row `i` of both refers to the same (local) node.
#[derive(Debug, Clone)]
pub struct ForwardContext {
    pub adjacency: SparseMatrix,
    pub features: Matrix,
}

/// Builds `Â` from sorted, symmetric neighbor lists given degree lookups
/// (degrees exclude the self-loop).
fn normalized(lists: &[Vec<usize>], degree: impl Fn(usize) -> usize) -> SparseMatrix {
    let n = lists.len();
    let inv_sqrt: Vec<f64> = (0..n).map(|v| 1.0 / ((degree(v) + 1) as f64).sqrt()).collect();
    let mut indptr = Vec::with_capacity(n + 1);
    let mut indices = Vec::new();
    let mut values = Vec::new();
    indptr.push(0);
    for (v, list) in lists.iter().enumerate() {
        let mut row: Vec<usize> = list.clone();
        row.push(v);
        row.sort_unstable();
        for u in row {
            indices.push(u);
            values.push(inv_sqrt[v] * inv_sqrt[u]);
        }
        indptr.push(indices.len());
    }
    SparseMatrix::new(n, indptr, indices, values).expect("well-formed CSR")
}

pub fn normalize_adjacency(graph: &PopulationGraph) -> ForwardContext {
    let lists: Vec<Vec<usize>> = (0..graph.num_nodes()).map(|v| graph.neighbors(v).to_vec()).collect();
    ForwardContext {
        adjacency: normalized(&lists, |v| graph.degree(v)),
        features: graph.features().clone(),
    }
}

impl ForwardContext {
    pub fn full(graph: &PopulationGraph) -> Self {
        normalize_adjacency(graph)
    }

    /// Features only, with `Â = I` (what an MLP sees).
    pub fn features_only(features: Matrix) -> Self {
        Self {
            adjacency: SparseMatrix::identity(features.rows()),
            features,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.features.rows()
    }

    /// Context over a sampled subgraph, normalized by the subgraph's own
    /// degrees. Local node 0 is the root.
    pub fn from_subgraph(graph: &PopulationGraph, sub: &SampledSubgraph) -> Self {
        let mut lists = vec![Vec::new(); sub.nodes.len()];
        for &(a, b) in &sub.edges {
            lists[a].push(b);
            lists[b].push(a);
        }
        for l in &mut lists {
            l.sort_unstable();
        }
        let degrees: Vec<usize> = lists.iter().map(Vec::len).collect();
        Self {
            adjacency: normalized(&lists, |v| degrees[v]),
            features: graph.features().gather_rows(&sub.nodes),
        }
    }

    /// Exact `hops`-ball around `root` with full-graph normalization. An
    /// `hops`-layer GCN produces the same logits at local node 0 (the root) on
    /// this context as at `root` on the full graph. Returns the context and
    /// the global ids of its nodes.
    pub fn ball(graph: &PopulationGraph, root: usize, hops: usize) -> (Self, Vec<usize>) {
        let mut local = std::collections::HashMap::new();
        let mut nodes = vec![root];
        local.insert(root, 0usize);
        let mut queue = VecDeque::from([(root, 0usize)]);
        while let Some((u, d)) = queue.pop_front() {
            if d == hops {
                continue;
            }
            for &w in graph.neighbors(u) {
                if let std::collections::hash_map::Entry::Vacant(e) = local.entry(w) {
                    e.insert(nodes.len());
                    nodes.push(w);
                    queue.push_back((w, d + 1));
                }
            }
        }
        let lists: Vec<Vec<usize>> = nodes
            .iter()
            .map(|&v| {
                let mut l: Vec<usize> = graph
                    .neighbors(v)
                    .iter()
                    .filter_map(|w| local.get(w).copied())
                    .collect();
                l.sort_unstable();
                l
            })
            .collect();
        let ctx = Self {
            adjacency: normalized(&lists, |i| graph.degree(nodes[i])),
            features: graph.features().gather_rows(&nodes),
        };
        (ctx, nodes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::graph_with_labels;

    #[test]
    fn isolated_node() {
        let ctx = normalize_adjacency(&graph_with_labels(&[0], &[]));
        assert_eq!(ctx.adjacency.to_dense().data(), &[1.0]);
    }

    #[test]
    fn two_node_clique() {
        let ctx = normalize_adjacency(&graph_with_labels(&[0, 1], &[(0, 1)]));
        for &v in ctx.adjacency.to_dense().data() {
            assert!((v - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn path_of_three() {
        let ctx = normalize_adjacency(&graph_with_labels(&[0, 0, 0], &[(0, 1), (1, 2)]));
        let a = ctx.adjacency.to_dense();
        // degrees with self-loops: 2, 3, 2
        let e = 1.0 / 6f64.sqrt();
        let expected = [[0.5, e, 0.0], [e, 1.0 / 3.0, e], [0.0, e, 0.5]];
        for r in 0..3 {
            for c in 0..3 {
                assert!((a.get(r, c) - expected[r][c]).abs() < 1e-15);
            }
        }
        // the middle row is the heaviest: 1/3 + 2/√6
        let sums: Vec<f64> = (0..3).map(|r| a.row(r).iter().sum()).collect();
        assert!((sums[1] - 1.149_829_914_261_059).abs() < 1e-12);
        assert!(ctx.adjacency.is_symmetric(0.0));
    }

    #[test]
    fn ball_uses_full_graph_degrees() {
        let g = graph_with_labels(&[0, 0, 0, 0], &[(0, 1), (1, 2), (2, 3)]);
        let (ctx, nodes) = ForwardContext::ball(&g, 0, 1);
        assert_eq!(nodes, vec![0, 1]);
        // node 1 has full degree 2, so Â[0][1] = 1/sqrt(2*3)
        assert!((ctx.adjacency.get(0, 1) - 1.0 / 6f64.sqrt()).abs() < 1e-15);
    }
}

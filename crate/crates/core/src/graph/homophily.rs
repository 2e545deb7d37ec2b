use crate::error::{Error, Result};
use crate::graph::PopulationGraph;

/// Fraction of undirected edges whose endpoints share a label.
pub fn edge_homophily(graph: &PopulationGraph) -> Result<f64> {
    let total = graph.num_edges();
    if total == 0 {
        return Err(Error::UndefinedMetric("edge homophily of an edgeless graph".into()));
    }
    let labels = graph.labels();
    let same = graph.edges().filter(|&(u, v)| labels[u] == labels[v]).count();
    Ok(same as f64 / total as f64)
}

/// Mean over non-isolated nodes of the fraction of neighbors sharing the
/// node's label.
pub fn node_homophily(graph: &PopulationGraph) -> Result<f64> {
    let labels = graph.labels();
    let mut sum = 0.0;
    let mut counted = 0usize;
    for v in 0..graph.num_nodes() {
        let nb = graph.neighbors(v);
        if nb.is_empty() {
            continue;
        }
        let same = nb.iter().filter(|&&u| labels[u] == labels[v]).count();
        sum += same as f64 / nb.len() as f64;
        counted += 1;
    }
    if counted == 0 {
        return Err(Error::UndefinedMetric("node homophily of an edgeless graph".into()));
    }
    Ok(sum / counted as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::graph_with_labels;
    use proptest::prelude::*;

    #[test]
    fn single_label_is_fully_homophilous() {
        let g = graph_with_labels(&[0, 0, 0, 0], &[(0, 1), (1, 2), (2, 3), (0, 3)]);
        assert_eq!(edge_homophily(&g).unwrap(), 1.0);
        assert_eq!(node_homophily(&g).unwrap(), 1.0);
    }

    #[test]
    fn triangle_with_one_odd_label() {
        let g = graph_with_labels(&[0, 0, 1], &[(0, 1), (1, 2), (0, 2)]);
        assert!((edge_homophily(&g).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        // node 0: 1/2, node 1: 1/2, node 2: 0
        assert!((node_homophily(&g).unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn edgeless_is_undefined() {
        let g = graph_with_labels(&[0, 1], &[]);
        assert!(matches!(edge_homophily(&g), Err(Error::UndefinedMetric(_))));
    }

    fn random_graph() -> impl Strategy<Value = (Vec<usize>, Vec<(usize, usize)>)> {
        (3usize..20).prop_flat_map(|n| {
            (
                proptest::collection::vec(0usize..2, n),
                proptest::collection::vec((0..n, 0..n), 1..40),
            )
                .prop_map(|(labels, edges)| {
                    let edges = edges.into_iter().filter(|(u, v)| u != v).collect();
                    (labels, edges)
                })
        })
    }

    proptest! {
        #[test]
        fn invariant_under_label_flip((labels, edges) in random_graph()) {
            prop_assume!(!edges.is_empty());
            let mut labels = labels;
            labels[0] = 0;
            labels[1] = 1;
            let g = graph_with_labels(&labels, &edges);
            let flipped: Vec<usize> = labels.iter().map(|y| 1 - y).collect();
            let f = graph_with_labels(&flipped, &edges);
            prop_assert_eq!(edge_homophily(&g).unwrap(), edge_homophily(&f).unwrap());
        }

        #[test]
        fn invariant_under_node_permutation((labels, edges) in random_graph(), seed in any::<u64>()) {
            prop_assume!(!edges.is_empty());
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let g = graph_with_labels(&labels, &edges);
            let mut perm: Vec<usize> = (0..labels.len()).collect();
            perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let p = g.permuted(&perm).unwrap();
            prop_assert!((edge_homophily(&g).unwrap() - edge_homophily(&p).unwrap()).abs() < 1e-15);
        }
    }
}

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::PopulationGraph;
use crate::tensor::{dot, l2_norm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Euclidean,
    Cosine,
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Metric::Euclidean),
            "cosine" => Ok(Metric::Cosine),
            other => Err(Error::InvalidParameter(format!("unknown metric {other:?}"))),
        }
    }
}

/// Connects every node to its `k` nearest other nodes and symmetrizes by
/// union. Equal distances are broken toward the lower node index, so the
/// result does not depend on the rayon worker count.
pub fn build_knn_graph(graph: PopulationGraph, k: usize, metric: Metric) -> Result<PopulationGraph> {
    let n = graph.num_nodes();
    if k == 0 || k >= n {
        return Err(Error::InvalidParameter(format!(
            "k must be in 1..{n} for a graph of {n} nodes, got {k}"
        )));
    }
    let x = graph.features();
    let norms: Vec<f64> = (0..n).map(|i| l2_norm(x.row(i))).collect();

    let distance = |i: usize, j: usize| -> f64 {
        match metric {
            Metric::Euclidean => x
                .row(i)
                .iter()
                .zip(x.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum(),
            Metric::Cosine => {
                let denom = norms[i] * norms[j];
                if denom == 0.0 {
                    1.0
                } else {
                    1.0 - dot(x.row(i), x.row(j)) / denom
                }
            }
        }
    };

    let candidates: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut others: Vec<(f64, usize)> =
                (0..n).filter(|&j| j != i).map(|j| (distance(i, j), j)).collect();
            let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            others.select_nth_unstable_by(k - 1, cmp);
            let mut nearest = others[..k].to_vec();
            nearest.sort_unstable_by(cmp);
            nearest.into_iter().map(|(_, j)| j).collect()
        })
        .collect();

    let edges: Vec<(usize, usize)> = candidates
        .into_iter()
        .enumerate()
        .flat_map(|(i, js)| js.into_iter().map(move |j| (i, j)))
        .collect();
    graph.with_edges(edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Matrix;
    use proptest::prelude::*;

    fn points(rows: &[Vec<f64>]) -> PopulationGraph {
        let labels = vec![0; rows.len()];
        PopulationGraph::new(Matrix::from_rows(rows).unwrap(), labels, 1).unwrap()
    }

    #[test]
    fn collinear_points() {
        // distances: d(0,1)=1, d(1,2)=2, d(0,2)=3 -> 0->1, 1->0, 2->1
        let g = build_knn_graph(points(&[vec![0.0], vec![1.0], vec![3.0]]), 1, Metric::Euclidean)
            .unwrap();
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn full_k_gives_complete_graph() {
        let g = build_knn_graph(
            points(&[vec![0.0, 1.0], vec![1.0, 4.0], vec![3.0, 0.5], vec![-2.0, 2.0]]),
            3,
            Metric::Euclidean,
        )
        .unwrap();
        assert_eq!(g.num_edges(), 6);
    }

    #[test]
    fn duplicate_points_tie_toward_lower_index() {
        // node 2 is equidistant from 0 and 1 and must pick 0
        let g = build_knn_graph(points(&[vec![0.0], vec![0.0], vec![5.0]]), 1, Metric::Euclidean)
            .unwrap();
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1), (0, 2)]);
    }

    #[test]
    fn k_too_large_is_parameter_error() {
        let g = points(&[vec![0.0], vec![1.0]]);
        assert!(matches!(
            build_knn_graph(g, 2, Metric::Euclidean),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn cosine_ignores_magnitude() {
        let g = build_knn_graph(
            points(&[vec![1.0, 0.0], vec![10.0, 0.5], vec![0.0, 1.0], vec![0.1, 3.0]]),
            1,
            Metric::Cosine,
        )
        .unwrap();
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1), (2, 3)]);
    }

    proptest! {
        #[test]
        fn symmetric_and_scale_invariant(
            rows in proptest::collection::vec(proptest::collection::vec(-10.0f64..10.0, 3), 5..25),
            k in 1usize..4,
            scale in 0.01f64..100.0,
        ) {
            let g = build_knn_graph(points(&rows), k, Metric::Euclidean).unwrap();
            g.check_invariants().unwrap();
            for v in 0..g.num_nodes() {
                prop_assert!(g.degree(v) >= k);
            }
            let scaled: Vec<Vec<f64>> =
                rows.iter().map(|r| r.iter().map(|x| x * scale).collect()).collect();
            let s = build_knn_graph(points(&scaled), k, Metric::Euclidean).unwrap();
            prop_assert_eq!(g.edges().collect::<Vec<_>>(), s.edges().collect::<Vec<_>>());
        }
    }
}

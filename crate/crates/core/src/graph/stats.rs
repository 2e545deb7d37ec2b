use serde::{Deserialize, Serialize};

use crate::dp::recommend_delta;
use crate::graph::{edge_homophily, node_homophily, PopulationGraph};

/// One row of a dataset summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub num_nodes: usize,
    pub num_edges: usize,
    pub mean_degree: f64,
    pub max_degree: usize,
    pub edge_homophily: Option<f64>,
    pub node_homophily: Option<f64>,
    pub class_histogram: Vec<usize>,
    pub num_train: usize,
    pub recommended_delta: Option<f64>,
}

pub fn graph_stats(graph: &PopulationGraph) -> GraphStats {
    let n = graph.num_nodes();
    let mut class_histogram = vec![0; graph.num_classes()];
    for &y in graph.labels() {
        class_histogram[y] += 1;
    }
    let num_train = graph.train_nodes().len();
    GraphStats {
        num_nodes: n,
        num_edges: graph.num_edges(),
        mean_degree: if n == 0 { 0.0 } else { 2.0 * graph.num_edges() as f64 / n as f64 },
        max_degree: (0..n).map(|v| graph.degree(v)).max().unwrap_or(0),
        edge_homophily: edge_homophily(graph).ok(),
        node_homophily: node_homophily(graph).ok(),
        class_histogram,
        num_train,
        recommended_delta: (num_train > 0).then(|| recommend_delta(num_train)),
    }
}

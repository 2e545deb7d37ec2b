//! Graph directories: `features.csv`, `labels.csv`, an undirected edge list
//! `edges.txt` ("u v" per line, u < v) and a JSON sidecar `graph.json`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{edge_homophily, PopulationGraph};

pub const FEATURES_FILE: &str = "features.csv";
pub const LABELS_FILE: &str = "labels.csv";
pub const EDGES_FILE: &str = "edges.txt";
pub const SIDECAR_FILE: &str = "graph.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSidecar {
    pub schema_version: u32,
    pub num_nodes: usize,
    pub num_classes: usize,
    pub homophily: Option<f64>,
    pub seed: Option<u64>,
    pub provenance: serde_json::Value,
}

impl GraphSidecar {
    pub fn describe(graph: &PopulationGraph, seed: Option<u64>, provenance: serde_json::Value) -> Self {
        Self {
            schema_version: 1,
            num_nodes: graph.num_nodes(),
            num_classes: graph.num_classes(),
            homophily: edge_homophily(graph).ok(),
            seed,
            provenance,
        }
    }
}

pub fn write_edge_list(path: impl AsRef<Path>, graph: &PopulationGraph) -> Result<()> {
    let mut out = String::new();
    for (u, v) in graph.edges() {
        let _ = writeln!(out, "{u} {v}");
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_edge_list(path: impl AsRef<Path>) -> Result<Vec<(usize, usize)>> {
    let text = fs::read_to_string(path)?;
    let mut edges = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let mut next = |column: usize| -> Result<usize> {
            let cell = parts.next().unwrap_or("");
            cell.parse().map_err(|_| Error::Parse {
                row: i + 1,
                column,
                message: format!("{cell:?} is not a node id"),
            })
        };
        let u = next(1)?;
        let v = next(2)?;
        edges.push((u, v));
    }
    Ok(edges)
}

pub fn write_graph_dir(dir: impl AsRef<Path>, graph: &PopulationGraph, sidecar: &GraphSidecar) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut features = String::new();
    for r in 0..graph.num_nodes() {
        let row: Vec<String> = graph.features().row(r).iter().map(|x| x.to_string()).collect();
        let _ = writeln!(features, "{}", row.join(","));
    }
    fs::write(dir.join(FEATURES_FILE), features)?;
    let labels: String = graph.labels().iter().map(|y| format!("{y}\n")).collect();
    fs::write(dir.join(LABELS_FILE), labels)?;
    write_edge_list(dir.join(EDGES_FILE), graph)?;
    fs::write(dir.join(SIDECAR_FILE), serde_json::to_string_pretty(sidecar)?)?;
    Ok(())
}

/// Loads a graph directory written by [`write_graph_dir`]. Features are read
/// verbatim (no re-standardization).
pub fn read_graph_dir(dir: impl AsRef<Path>) -> Result<(PopulationGraph, GraphSidecar)> {
    let dir = dir.as_ref();
    let sidecar: GraphSidecar = serde_json::from_str(&fs::read_to_string(dir.join(SIDECAR_FILE))?)?;
    let graph = crate::graph::load_csv(
        dir.join(FEATURES_FILE),
        dir.join(LABELS_FILE),
        crate::graph::CsvOptions {
            standardize: false,
            has_header: false,
        },
    )?;
    // the sidecar's class count wins over the one inferred from labels
    let classes = sidecar.num_classes.max(graph.num_classes());
    let graph = PopulationGraph::new(graph.features().clone(), graph.labels().to_vec(), classes)?;
    if graph.num_nodes() != sidecar.num_nodes {
        return Err(Error::Ingestion(format!(
            "sidecar declares {} nodes, files hold {}",
            sidecar.num_nodes,
            graph.num_nodes()
        )));
    }
    let graph = graph.with_edges(read_edge_list(dir.join(EDGES_FILE))?)?;
    Ok((graph, sidecar))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_synthetic, SyntheticSpec};

    #[test]
    fn graph_dir_round_trip() {
        let spec = SyntheticSpec {
            num_nodes: 60,
            ..SyntheticSpec::default()
        };
        let out = generate_synthetic(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let sidecar = GraphSidecar::describe(
            &out.graph,
            Some(spec.seed),
            serde_json::to_value(&out.provenance).unwrap(),
        );
        write_graph_dir(dir.path(), &out.graph, &sidecar).unwrap();
        let (back, side) = read_graph_dir(dir.path()).unwrap();
        assert_eq!(back, out.graph);
        assert_eq!(side, sidecar);

        let text = fs::read_to_string(dir.path().join(EDGES_FILE)).unwrap();
        assert!(text.lines().all(|l| {
            let v: Vec<usize> = l.split(' ').map(|x| x.parse().unwrap()).collect();
            v[0] < v[1]
        }));
    }

    #[test]
    fn bad_edge_line_reports_location() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.txt");
        fs::write(&p, "0 1\n2 x\n").unwrap();
        assert!(matches!(read_edge_list(&p), Err(Error::Parse { row: 2, column: 2, .. })));
    }
}

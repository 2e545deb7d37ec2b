use rand::seq::index::sample;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::PopulationGraph;
use crate::rng::{stream_rng, Stream};

/// Bounded-degree r-hop neighborhood of one training node. Nodes are listed
/// in discovery order with the root first; `edges` are the sampled
/// parent→child links as local indices. Only the root's loss is used.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampledSubgraph {
    pub root: usize,
    pub nodes: Vec<usize>,
    pub hops: Vec<usize>,
    pub edges: Vec<(usize, usize)>,
}

impl SampledSubgraph {
    pub fn contains(&self, v: usize) -> bool {
        self.nodes.contains(&v)
    }
}

/// Samples one subgraph per training node.
///
/// Roots are visited in a seeded random order. Each BFS expansion keeps at
/// most `max_degree` not-yet-included neighbors chosen uniformly, and skips any
/// node that already appears in `occurrence_bound` subgraphs. Every training
/// node has one occurrence reserved for its own subgraph, so after sampling no
/// node appears in more than `occurrence_bound` subgraphs.
pub fn sample_training_subgraphs(
    graph: &PopulationGraph,
    max_degree: usize,
    hops: usize,
    occurrence_bound: usize,
    seed: u64,
) -> Result<Vec<SampledSubgraph>> {
    if occurrence_bound == 0 || max_degree == 0 {
        return Err(Error::InvalidParameter(
            "occurrence bound and max degree must be at least 1".into(),
        ));
    }
    let mut rng = stream_rng(seed, Stream::Sampler);
    let mut roots = graph.train_nodes();
    roots.shuffle(&mut rng);

    let mut occurrences = vec![0usize; graph.num_nodes()];
    for &r in &roots {
        occurrences[r] = 1;
    }

    let mut out = Vec::with_capacity(roots.len());
    let mut starved = 0usize;
    let mut local_of = vec![usize::MAX; graph.num_nodes()];
    for &root in &roots {
        let mut sub = SampledSubgraph {
            root,
            nodes: vec![root],
            hops: vec![0],
            edges: Vec::new(),
        };
        local_of[root] = 0;
        let mut frontier = vec![0usize];
        for hop in 1..=hops {
            let mut next = Vec::new();
            for &parent in &frontier {
                let u = sub.nodes[parent];
                let eligible: Vec<usize> = graph
                    .neighbors(u)
                    .iter()
                    .copied()
                    .filter(|&w| local_of[w] == usize::MAX && occurrences[w] < occurrence_bound)
                    .collect();
                let take = eligible.len().min(max_degree);
                let mut picks: Vec<usize> = sample(&mut rng, eligible.len(), take).into_iter().collect();
                picks.sort_unstable();
                for i in picks {
                    let w = eligible[i];
                    let local = sub.nodes.len();
                    local_of[w] = local;
                    occurrences[w] += 1;
                    sub.nodes.push(w);
                    sub.hops.push(hop);
                    sub.edges.push((parent, local));
                    next.push(local);
                }
            }
            frontier = next;
        }
        if sub.nodes.len() == 1 && graph.degree(root) > 0 {
            starved += 1;
        }
        for &v in &sub.nodes {
            local_of[v] = usize::MAX;
        }
        out.push(sub);
    }
    if starved > 0 {
        log::info!("{starved} training roots could not expand and kept root-only subgraphs");
    }
    Ok(out)
}

/// Exhaustive recount over a subgraph collection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OccurrenceAudit {
    pub max_occurrence: usize,
    /// Largest number of children any node received in one expansion.
    pub max_children: usize,
    pub max_hop: usize,
}

pub fn audit_occurrences(subgraphs: &[SampledSubgraph], num_nodes: usize) -> OccurrenceAudit {
    let mut counts = vec![0usize; num_nodes];
    let mut max_children = 0;
    let mut max_hop = 0;
    for s in subgraphs {
        let mut children = vec![0usize; s.nodes.len()];
        for &(p, _) in &s.edges {
            children[p] += 1;
        }
        max_children = max_children.max(children.into_iter().max().unwrap_or(0));
        max_hop = max_hop.max(s.hops.iter().copied().max().unwrap_or(0));
        for &v in &s.nodes {
            counts[v] += 1;
        }
    }
    OccurrenceAudit {
        max_occurrence: counts.into_iter().max().unwrap_or(0),
        max_children,
        max_hop,
    }
}

use proptest::prelude::*;

use dpgnn_core::gnn::{forward_logits, loss_and_grad, Architecture, ForwardContext, ModelParams};
use dpgnn_core::graph::PopulationGraph;
use dpgnn_core::tensor::Matrix;

fn graph(n: usize, feats: &[f64], edges: &[(usize, usize)], labels: Vec<usize>) -> PopulationGraph {
    let d = feats.len() / n;
    PopulationGraph::new(Matrix::from_vec(n, d, feats.to_vec()).unwrap(), labels, 2)
        .unwrap()
        .with_edges(edges.iter().copied().filter(|(u, v)| u != v))
        .unwrap()
}

fn random_case() -> impl Strategy<Value = (usize, Vec<f64>, Vec<(usize, usize)>, Vec<usize>)> {
    (3usize..14).prop_flat_map(|n| {
        (
            Just(n),
            prop::collection::vec(-2.0f64..2.0, n * 3),
            prop::collection::vec((0..n, 0..n), 0..2 * n),
            prop::collection::vec(0usize..2, n),
        )
    })
}

/// Hop distance from `src` to every node (usize::MAX if unreachable).
fn distances(g: &PopulationGraph, src: usize) -> Vec<usize> {
    let mut d = vec![usize::MAX; g.num_nodes()];
    d[src] = 0;
    let mut queue = std::collections::VecDeque::from([src]);
    while let Some(u) = queue.pop_front() {
        for &w in g.neighbors(u) {
            if d[w] == usize::MAX {
                d[w] = d[u] + 1;
                queue.push_back(w);
            }
        }
    }
    d
}

#[test]
fn gradient_matches_finite_differences_on_eight_nodes() {
    let feats: Vec<f64> = (0..24).map(|i| ((i * 37 % 11) as f64 - 5.0) / 4.0).collect();
    let edges = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 7), (0, 4), (2, 6)];
    let g = graph(8, &feats, &edges, vec![0, 1, 0, 1, 1, 0, 0, 1]);
    let ctx = ForwardContext::full(&g);
    let params = ModelParams::init(Architecture::Gcn, 3, 4, 2, 2, 3).unwrap();
    let nodes: Vec<usize> = (0..8).collect();
    let (_, grad) = loss_and_grad(&ctx, &params, g.labels(), &nodes).unwrap();
    let h = 1e-4;
    let mut num = Vec::new();
    for i in 0..params.len() {
        let mut p = params.clone();
        p.values_mut()[i] += h;
        let up = loss_and_grad(&ctx, &p, g.labels(), &nodes).unwrap().0;
        p.values_mut()[i] -= 2.0 * h;
        let down = loss_and_grad(&ctx, &p, g.labels(), &nodes).unwrap().0;
        num.push((up - down) / (2.0 * h));
    }
    let diff: f64 = grad.iter().zip(&num).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = grad.iter().map(|a| a * a).sum::<f64>().sqrt();
    assert!(diff / scale <= 1e-4, "relative error {}", diff / scale);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Changing a node's features moves the logits of exactly the nodes within
    /// `r` hops of it.
    #[test]
    fn logits_are_r_hop_local((n, feats, edges, labels) in random_case(), target in 0usize..14, layers in 1usize..=3) {
        let target = target % n;
        let g = graph(n, &feats, &edges, labels.clone());
        let params = ModelParams::init(Architecture::Gcn, 3, 5, 2, layers, 9).unwrap();
        let before = forward_logits(&ForwardContext::full(&g), &params).unwrap();
        let mut moved = feats.clone();
        for x in &mut moved[target * 3..target * 3 + 3] {
            *x += 10.0;
        }
        let g2 = graph(n, &moved, &edges, labels);
        let after = forward_logits(&ForwardContext::full(&g2), &params).unwrap();
        let dist = distances(&g, target);
        for v in 0..n {
            if dist[v] > layers {
                prop_assert_eq!(before.row(v), after.row(v), "node {} at distance {}", v, dist[v]);
            }
        }
    }

    #[test]
    fn gcn_is_permutation_equivariant((n, feats, edges, labels) in random_case(), seed in any::<u64>()) {
        let g = graph(n, &feats, &edges, labels);
        let mut perm: Vec<usize> = (0..n).collect();
        // deterministic shuffle driven by the seed
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let p = g.permuted(&perm).unwrap();
        let params = ModelParams::init(Architecture::Gcn, 3, 6, 2, 2, 4).unwrap();
        let a = forward_logits(&ForwardContext::full(&g), &params).unwrap();
        let b = forward_logits(&ForwardContext::full(&p), &params).unwrap();
        for v in 0..n {
            for (x, y) in a.row(v).iter().zip(b.row(perm[v])) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }

    /// The exact r-hop ball reproduces the full-graph logit at its root.
    #[test]
    fn ball_matches_full_graph_at_root((n, feats, edges, labels) in random_case(), root in 0usize..14) {
        let root = root % n;
        let g = graph(n, &feats, &edges, labels);
        let params = ModelParams::init(Architecture::Gcn, 3, 4, 2, 2, 1).unwrap();
        let full = forward_logits(&ForwardContext::full(&g), &params).unwrap();
        let (ctx, nodes) = ForwardContext::ball(&g, root, 2);
        prop_assert_eq!(nodes[0], root);
        let local = forward_logits(&ctx, &params).unwrap();
        for (x, y) in full.row(root).iter().zip(local.row(0)) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }
}

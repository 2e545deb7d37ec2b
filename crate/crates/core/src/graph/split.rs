use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Masks, PopulationGraph};
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.56,
            val_fraction: 0.14,
            test_fraction: 0.30,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let f = [self.train_fraction, self.val_fraction, self.test_fraction];
        if f.iter().any(|&x| !(x >= 0.0)) {
            return Err(Error::InvalidParameter("split fractions must be non-negative".into()));
        }
        let sum: f64 = f.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("split fractions sum to {sum}, not 1")));
        }
        Ok(())
    }
}

/// Largest-remainder apportionment of `n` nodes over (train, val, test).
/// Equal remainders favor the earlier set.
pub fn split_counts(n: usize, spec: &SplitSpec) -> Result<[usize; 3]> {
    spec.validate()?;
    let quotas = [spec.train_fraction, spec.val_fraction, spec.test_fraction].map(|f| f * n as f64);
    let mut counts = quotas.map(|q| q.floor() as usize);
    let assigned: usize = counts.iter().sum();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    Ok(counts)
}

/// Seeded uniform shuffle of node ids, cut into train/val/test by
/// [`split_counts`].
pub fn assign_splits(graph: PopulationGraph, spec: &SplitSpec) -> Result<PopulationGraph> {
    let n = graph.num_nodes();
    let [n_train, n_val, _] = split_counts(n, spec)?;
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(&mut stream_rng(spec.seed, Stream::Split));
    let mut masks = Masks::unassigned(n);
    for (rank, &v) in ids.iter().enumerate() {
        if rank < n_train {
            masks.train[v] = true;
        } else if rank < n_train + n_val {
            masks.val[v] = true;
        } else {
            masks.test[v] = true;
        }
    }
    graph.with_masks(masks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::graph_with_labels;

    fn spec(a: f64, b: f64, c: f64) -> SplitSpec {
        SplitSpec {
            train_fraction: a,
            val_fraction: b,
            test_fraction: c,
            seed: 9,
        }
    }

    #[test]
    fn exact_fractions() {
        assert_eq!(split_counts(10, &spec(0.5, 0.2, 0.3)).unwrap(), [5, 2, 3]);
    }

    #[test]
    fn largest_remainder_rounding() {
        assert_eq!(split_counts(3, &spec(0.34, 0.33, 0.33)).unwrap(), [1, 1, 1]);
        assert_eq!(split_counts(1000, &spec(0.56, 0.14, 0.30)).unwrap(), [560, 140, 300]);
    }

    #[test]
    fn fractions_must_sum_to_one() {
        assert!(split_counts(10, &spec(0.5, 0.5, 0.5)).is_err());
        assert!(split_counts(10, &spec(1.2, -0.2, 0.0)).is_err());
    }

    #[test]
    fn masks_are_disjoint_and_deterministic() {
        let g = graph_with_labels(&[0; 10], &[]);
        let a = assign_splits(g.clone(), &spec(0.5, 0.2, 0.3)).unwrap();
        let b = assign_splits(g.clone(), &spec(0.5, 0.2, 0.3)).unwrap();
        assert_eq!(a.masks(), b.masks());
        assert_eq!(a.train_nodes().len(), 5);
        assert_eq!(a.val_nodes().len(), 2);
        assert_eq!(a.test_nodes().len(), 3);
        a.check_invariants().unwrap();
    }
}

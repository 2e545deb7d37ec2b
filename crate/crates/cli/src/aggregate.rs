//! Per-group statistics over seeds and homophily trends.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::output::{opt_num, percent_pm};
use crate::run::CellRecord;

/// Test accuracy over the seeds of one (homophily, variant, ε) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub homophily: Option<f64>,
    pub variant: String,
    pub epsilon: Option<f64>,
    pub n_ok: usize,
    pub n_failed: usize,
    pub test_acc_mean: Option<f64>,
    /// Population standard deviation.
    pub test_acc_std: Option<f64>,
    pub manifest_hash: String,
}

pub const AGGREGATE_HEADER: &str =
    "homophily,variant,epsilon,n_ok,n_failed,test_acc_mean,test_acc_std,test_acc_pct,manifest_hash";

fn same_key(a: &CellRecord, row: &AggregateRow) -> bool {
    a.variant == row.variant
        && a.homophily.map(f64::to_bits) == row.homophily.map(f64::to_bits)
        && a.epsilon.map(f64::to_bits) == row.epsilon.map(f64::to_bits)
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

/// Groups cells in first-appearance order.
pub fn aggregate(cells: &[CellRecord], manifest_hash: &str) -> Vec<AggregateRow> {
    let mut rows: Vec<(AggregateRow, Vec<f64>)> = Vec::new();
    for c in cells {
        let idx = match rows.iter().position(|(r, _)| same_key(c, r)) {
            Some(i) => i,
            None => {
                rows.push((
                    AggregateRow {
                        homophily: c.homophily,
                        variant: c.variant.clone(),
                        epsilon: c.epsilon,
                        n_ok: 0,
                        n_failed: 0,
                        test_acc_mean: None,
                        test_acc_std: None,
                        manifest_hash: manifest_hash.to_string(),
                    },
                    Vec::new(),
                ));
                rows.len() - 1
            }
        };
        let (row, accs) = &mut rows[idx];
        match (c.ok(), c.test_acc) {
            (true, Some(a)) => {
                row.n_ok += 1;
                accs.push(a);
            }
            _ => row.n_failed += 1,
        }
    }
    rows.into_iter()
        .map(|(mut r, accs)| {
            if let Some((m, s)) = mean_std(&accs) {
                r.test_acc_mean = Some(m);
                r.test_acc_std = Some(s);
            }
            r
        })
        .collect()
}

pub fn write_aggregate_csv(rows: &[AggregateRow]) -> String {
    let mut out = format!("{AGGREGATE_HEADER}\n");
    for r in rows {
        let pct = match (r.test_acc_mean, r.test_acc_std) {
            (Some(m), Some(s)) => percent_pm(m, s),
            _ => String::new(),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            opt_num(r.homophily),
            r.variant,
            opt_num(r.epsilon),
            r.n_ok,
            r.n_failed,
            opt_num(r.test_acc_mean),
            opt_num(r.test_acc_std),
            pct,
            r.manifest_hash
        );
    }
    out
}

/// Parses a CSV written by [`write_aggregate_csv`].
pub fn parse_aggregate_csv(text: &str) -> Result<Vec<AggregateRow>, String> {
    let mut lines = text.lines();
    if lines.next() != Some(AGGREGATE_HEADER) {
        return Err("unexpected aggregate header".into());
    }
    let num = |s: &str| -> Result<Option<f64>, String> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(|_| format!("bad number {s:?}"))
        }
    };
    let count = |s: &str| s.parse::<usize>().map_err(|_| format!("bad count {s:?}"));
    lines
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 9 {
                return Err(format!("expected 9 fields in {line:?}"));
            }
            Ok(AggregateRow {
                homophily: num(f[0])?,
                variant: f[1].to_string(),
                epsilon: num(f[2])?,
                n_ok: count(f[3])?,
                n_failed: count(f[4])?,
                test_acc_mean: num(f[5])?,
                test_acc_std: num(f[6])?,
                manifest_hash: f[8].to_string(),
            })
        })
        .collect()
}

/// Long form for homophily plots.
pub fn write_sweep_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::from("h,variant,epsilon,mean_acc,std_acc,n\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            opt_num(r.homophily),
            r.variant,
            opt_num(r.epsilon),
            opt_num(r.test_acc_mean),
            opt_num(r.test_acc_std),
            r.n_ok
        );
    }
    out
}

/// Ranks starting at 1; tied values share their average rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman's ρ (Pearson correlation of average ranks). `None` with fewer
/// than two points or when either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some(cov / (vx * vy).sqrt())
}

/// Spearman ρ between homophily and test accuracy for one (variant, ε),
/// per seed or (`seed = None`) over the seed means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendRow {
    pub variant: String,
    pub epsilon: Option<f64>,
    pub seed: Option<u64>,
    pub n_points: usize,
    pub spearman_rho: Option<f64>,
}

pub fn spearman_trends(cells: &[CellRecord]) -> Vec<TrendRow> {
    let mut groups: Vec<(String, Option<f64>)> = Vec::new();
    for c in cells {
        let key = (c.variant.clone(), c.epsilon);
        if !groups.iter().any(|g| g.0 == key.0 && g.1.map(f64::to_bits) == key.1.map(f64::to_bits)) {
            groups.push(key);
        }
    }
    let mut out = Vec::new();
    for (variant, eps) in groups {
        let members: Vec<&CellRecord> = cells
            .iter()
            .filter(|c| c.variant == variant && c.epsilon.map(f64::to_bits) == eps.map(f64::to_bits))
            .filter(|c| c.ok())
            .collect();
        let mut seeds: Vec<u64> = members.iter().map(|c| c.seed).collect();
        seeds.sort_unstable();
        seeds.dedup();
        for &s in &seeds {
            let pts: Vec<(f64, f64)> = members
                .iter()
                .filter(|c| c.seed == s)
                .filter_map(|c| Some((c.homophily?, c.test_acc?)))
                .collect();
            let (h, a): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
            out.push(TrendRow {
                variant: variant.clone(),
                epsilon: eps,
                seed: Some(s),
                n_points: h.len(),
                spearman_rho: spearman(&h, &a),
            });
        }
        let mut hs: Vec<f64> = members.iter().filter_map(|c| c.homophily).collect();
        hs.sort_by(f64::total_cmp);
        hs.dedup();
        let means: Vec<f64> = hs
            .iter()
            .filter_map(|&h| {
                let accs: Vec<f64> = members
                    .iter()
                    .filter(|c| c.homophily == Some(h))
                    .filter_map(|c| c.test_acc)
                    .collect();
                mean_std(&accs).map(|(m, _)| m)
            })
            .collect();
        out.push(TrendRow {
            variant,
            epsilon: eps,
            seed: None,
            n_points: hs.len(),
            spearman_rho: spearman(&hs, &means),
        });
    }
    out
}

pub fn write_trend_csv(rows: &[TrendRow]) -> String {
    let mut out = String::from("variant,epsilon,seed,n_points,spearman_rho\n");
    for r in rows {
        let seed = r.seed.map_or_else(|| "mean".to_string(), |s| s.to_string());
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.variant,
            opt_num(r.epsilon),
            seed,
            r.n_points,
            opt_num(r.spearman_rho)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn population_std() {
        let (m, s) = mean_std(&[0.6, 0.7, 0.8]).unwrap();
        assert!((m - 0.7).abs() < 1e-15);
        assert!((s - (0.02f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_std(&[0.5]), Some((0.5, 0.0)));
        assert_eq!(mean_std(&[]), None);
    }

    #[test]
    fn ties_share_ranks() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn spearman_known_values() {
        let h = [0.5, 0.6, 0.7, 0.8, 0.9];
        assert_eq!(spearman(&h, &[0.5, 0.55, 0.6, 0.8, 0.95]), Some(1.0));
        assert_eq!(spearman(&h, &[5.0, 4.0, 3.0, 2.0, 1.0]), Some(-1.0));
        // one swapped pair: 1 − 6·2/(5·24)
        let r = spearman(&h, &[1.0, 2.0, 4.0, 3.0, 5.0]).unwrap();
        assert!((r - 0.9).abs() < 1e-12);
        assert_eq!(spearman(&h, &[1.0; 5]), None);
    }

    proptest! {
        #[test]
        fn csv_roundtrip_is_exact(
            rows in prop::collection::vec((0.0f64..1.0, 0.0f64..0.5, 1usize..6, 0usize..3), 1..8)
        ) {
            let rows: Vec<AggregateRow> = rows
                .into_iter()
                .enumerate()
                .map(|(i, (m, s, ok, failed))| AggregateRow {
                    homophily: Some(0.5 + i as f64 / 10.0),
                    variant: format!("v{i}"),
                    epsilon: (i % 2 == 0).then_some(5.0),
                    n_ok: ok,
                    n_failed: failed,
                    test_acc_mean: Some(m),
                    test_acc_std: Some(s),
                    manifest_hash: "abc".into(),
                })
                .collect();
            let parsed = parse_aggregate_csv(&write_aggregate_csv(&rows)).unwrap();
            prop_assert_eq!(parsed, rows);
        }

        #[test]
        fn spearman_is_bounded_and_rank_invariant(
            ys in prop::collection::vec(-10.0f64..10.0, 5)
        ) {
            let h = [0.5, 0.6, 0.7, 0.8, 0.9];
            if let Some(r) = spearman(&h, &ys) {
                prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&r));
                let warped: Vec<f64> = ys.iter().map(|y| y.powi(3) + 2.0 * y).collect();
                prop_assert!((spearman(&h, &warped).unwrap() - r).abs() < 1e-12);
            }
        }
    }
}

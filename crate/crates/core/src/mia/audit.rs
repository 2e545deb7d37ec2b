use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dp::{supremum_power, PowerBound, PrivacySpec};
use crate::error::{Error, Result};
use crate::gnn::{ModelParams, TrainConfig};
use crate::graph::PopulationGraph;
use crate::mia::lira::lira_score;
use crate::mia::roc::{roc, RocCurve, FPR_GRID};
use crate::mia::shadows::{target_confidences, train_shadows, ShadowConfig, ShadowEnsemble};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// z-score of a two-sided 95% normal interval.
const Z_95: f64 = 1.96;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AuditConfig {
    pub shadows: ShadowConfig,
    pub fpr_grid: Vec<f64>,
    pub power_bound: PowerBound,
    pub seed: u64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            shadows: ShadowConfig::default(),
            fpr_grid: FPR_GRID.to_vec(),
            power_bound: PowerBound::default(),
            seed: 0,
        }
    }
}

/// What the report says about the audited model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetInfo {
    pub variant: String,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
}

impl TargetInfo {
    pub fn non_dp(variant: impl Into<String>) -> Self {
        Self {
            variant: variant.into(),
            epsilon: None,
            delta: None,
        }
    }

    pub fn dp(variant: impl Into<String>, spec: &PrivacySpec) -> Self {
        Self {
            variant: variant.into(),
            epsilon: Some(spec.epsilon_target),
            delta: Some(spec.delta),
        }
    }
}

/// Empirical TPR against the bound at one FPR budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub fpr: f64,
    pub tpr: f64,
    pub supremum_power: f64,
    /// 95% binomial half-width at the bound for the member count.
    pub half_width: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub schema_version: u32,
    pub model_variant: String,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub n_shadows: usize,
    pub auc: f64,
    pub tpr: BTreeMap<String, f64>,
    pub supremum_power: Option<BTreeMap<String, f64>>,
    pub bound_check: Vec<BoundCheck>,
    pub n_members: usize,
    pub n_nonmembers: usize,
    pub n_excluded: usize,
    pub seed: u64,
    /// Scored nodes with their Λ and membership, in node order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nodes: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scores: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub members: Vec<bool>,
    #[serde(skip)]
    pub roc: Option<RocCurve>,
}

impl AttackReport {
    /// False when any DP bound check fails.
    pub fn sound(&self) -> bool {
        self.bound_check.iter().all(|c| c.holds)
    }

    /// Drops the per-node arrays, keeping the summary.
    pub fn summary(mut self) -> Self {
        self.nodes.clear();
        self.scores.clear();
        self.members.clear();
        self
    }
}

fn fpr_key(f: f64) -> String {
    format!("{f}")
}

/// Normal-approximation half-width `z·sqrt(p(1 − p)/n)` of a binomial rate.
pub fn binomial_half_width(p: f64, n: usize) -> f64 {
    if n == 0 {
        return f64::INFINITY;
    }
    Z_95 * (p * (1.0 - p) / n as f64).sqrt()
}

/// Scores `target` against an already trained ensemble. Members are the
/// graph's training nodes, non-members its test nodes.
pub fn audit_with_ensemble(
    graph: &PopulationGraph,
    target: &ModelParams,
    ensemble: &ShadowEnsemble,
    info: &TargetInfo,
    config: &AuditConfig,
) -> Result<AttackReport> {
    let masks = graph.masks();
    if ensemble.pool.iter().any(|&v| !(masks.train[v] || masks.test[v])) {
        return Err(Error::AuditSetup("ensemble pool does not match the graph masks".into()));
    }
    let target_phi = target_confidences(graph, target, &ensemble.pool)?;
    let raw = lira_score(ensemble, &target_phi)?;

    let mut nodes = Vec::new();
    let mut scores = Vec::new();
    let mut members = Vec::new();
    for (&v, s) in ensemble.pool.iter().zip(&raw) {
        if let Some(s) = s {
            nodes.push(v);
            scores.push(*s);
            members.push(masks.train[v]);
        }
    }
    let n_members = members.iter().filter(|&&m| m).count();
    let n_nonmembers = members.len() - n_members;
    if n_members == 0 || n_nonmembers == 0 {
        return Err(Error::AuditSetup(format!(
            "audit needs members and non-members, got {n_members} and {n_nonmembers}"
        )));
    }
    let curve = roc(&scores, &members)?;

    let tpr: BTreeMap<String, f64> = config
        .fpr_grid
        .iter()
        .map(|&f| (fpr_key(f), curve.tpr_at(f)))
        .collect();
    let (supremum, checks) = match (info.epsilon, info.delta) {
        (Some(eps), Some(delta)) => {
            let mut powers = BTreeMap::new();
            let mut checks = Vec::new();
            for &f in &config.fpr_grid {
                let p = supremum_power(eps, delta, f, config.power_bound);
                let t = curve.tpr_at(f);
                let half_width = binomial_half_width(p, n_members);
                powers.insert(fpr_key(f), p);
                checks.push(BoundCheck {
                    fpr: f,
                    tpr: t,
                    supremum_power: p,
                    half_width,
                    holds: t <= p + half_width,
                });
            }
            (Some(powers), checks)
        }
        _ => (None, Vec::new()),
    };

    Ok(AttackReport {
        schema_version: REPORT_SCHEMA_VERSION,
        model_variant: info.variant.clone(),
        epsilon: info.epsilon,
        delta: info.delta,
        n_shadows: ensemble.num_shadows(),
        auc: curve.auc(),
        tpr,
        supremum_power: supremum,
        bound_check: checks,
        n_members,
        n_nonmembers,
        n_excluded: raw.iter().filter(|s| s.is_none()).count(),
        seed: config.seed,
        nodes,
        scores,
        members,
        roc: Some(curve),
    })
}

/// Trains the shadow ensemble with the target's own pipeline and scores the
/// target.
pub fn audit(
    graph: &PopulationGraph,
    target: &ModelParams,
    train_config: &TrainConfig,
    dp: Option<&PrivacySpec>,
    config: &AuditConfig,
    variant: &str,
) -> Result<AttackReport> {
    let ensemble = train_shadows(graph, train_config, dp, &config.shadows, config.seed)?;
    let info = match dp {
        Some(spec) => TargetInfo::dp(variant, spec),
        None => TargetInfo::non_dp(variant),
    };
    audit_with_ensemble(graph, target, &ensemble, &info, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_width_vanishes_at_the_edges() {
        assert_eq!(binomial_half_width(1.0, 100), 0.0);
        assert_eq!(binomial_half_width(0.0, 100), 0.0);
        assert!((binomial_half_width(0.5, 100) - 0.098).abs() < 1e-12);
    }

    #[test]
    fn keys_match_grid_spelling() {
        let keys: Vec<String> = FPR_GRID.iter().map(|&f| fpr_key(f)).collect();
        assert_eq!(keys, ["0.001", "0.005", "0.01"]);
    }
}

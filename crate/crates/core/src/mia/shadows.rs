use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::softmax;
use crate::dp::PrivacySpec;
use crate::error::{Error, Result};
use crate::gnn::{forward_logits, train, ForwardContext, ModelParams, TrainConfig};
use crate::graph::{Masks, PopulationGraph};
use crate::rng::{derive_seed, stream_rng, Stream};

/// True-class probabilities are clamped to `[c, 1 − c]` before the logit.
pub const CONFIDENCE_CLAMP: f64 = 1e-7;

/// `ln(p / (1 − p))` of a clamped probability.
pub fn phi(p: f64) -> f64 {
    let p = p.clamp(CONFIDENCE_CLAMP, 1.0 - CONFIDENCE_CLAMP);
    (p / (1.0 - p)).ln()
}

/// φ of the true-class probability at each of `nodes`, from a full-graph
/// forward pass.
pub fn target_confidences(graph: &PopulationGraph, params: &ModelParams, nodes: &[usize]) -> Result<Vec<f64>> {
    let probs = softmax(&forward_logits(&ForwardContext::full(graph), params)?);
    Ok(nodes.iter().map(|&v| phi(probs.get(v, graph.labels()[v]))).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShadowConfig {
    pub num_shadows: usize,
    /// Minimum IN and OUT count per audited node.
    pub min_coverage: usize,
    /// Membership redraws allowed before giving up.
    pub max_resamples: usize,
}

impl Default for ShadowConfig {
    fn default() -> Self {
        Self {
            num_shadows: 128,
            min_coverage: 8,
            max_resamples: 100,
        }
    }
}

/// Per-shadow membership and φ over the audit pool. Row `s` of both tables
/// belongs to shadow `s`; column `i` to `pool[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShadowEnsemble {
    pub pool: Vec<usize>,
    pub membership: Vec<Vec<bool>>,
    pub phi: Vec<Vec<f64>>,
}

impl ShadowEnsemble {
    pub fn num_shadows(&self) -> usize {
        self.membership.len()
    }

    /// Copy with shadow `s` removed.
    pub fn without_shadow(&self, s: usize) -> Self {
        let mut out = self.clone();
        out.membership.remove(s);
        out.phi.remove(s);
        out
    }

    /// `(in, out)` counts for pool position `i`.
    pub fn coverage(&self, i: usize) -> (usize, usize) {
        let ins = self.membership.iter().filter(|m| m[i]).count();
        (ins, self.num_shadows() - ins)
    }
}

/// Independent fair-coin memberships, redrawn as a whole until every pool
/// node is IN and OUT at least `min_coverage` times.
pub fn shadow_memberships(pool_len: usize, config: &ShadowConfig, seed: u64) -> Result<Vec<Vec<bool>>> {
    if config.num_shadows < 2 * config.min_coverage || config.num_shadows == 0 {
        return Err(Error::AuditSetup(format!(
            "{} shadows cannot give every node {} IN and {} OUT models",
            config.num_shadows, config.min_coverage, config.min_coverage
        )));
    }
    let mut rng = stream_rng(seed, Stream::Shadow);
    for _ in 0..=config.max_resamples {
        let draw: Vec<Vec<bool>> = (0..config.num_shadows)
            .map(|_| (0..pool_len).map(|_| rng.random_bool(0.5)).collect())
            .collect();
        let covered = (0..pool_len).all(|i| {
            let ins = draw.iter().filter(|m| m[i]).count();
            ins >= config.min_coverage && config.num_shadows - ins >= config.min_coverage
        });
        if covered {
            return Ok(draw);
        }
    }
    Err(Error::AuditSetup(format!(
        "no membership draw gave every node {} IN and OUT shadows after {} resamples",
        config.min_coverage, config.max_resamples
    )))
}

/// Trains one shadow model per membership draw with the target's pipeline.
///
/// The audit pool is the target's train ∪ test nodes. Each shadow trains on
/// its IN nodes and keeps the target's validation mask. DP shadows get their
/// noise multiplier recalibrated for their own training-set size.
pub fn train_shadows(
    graph: &PopulationGraph,
    config: &TrainConfig,
    dp: Option<&PrivacySpec>,
    shadow: &ShadowConfig,
    seed: u64,
) -> Result<ShadowEnsemble> {
    let masks = graph.masks();
    let pool: Vec<usize> = (0..graph.num_nodes())
        .filter(|&v| masks.train[v] || masks.test[v])
        .collect();
    if pool.is_empty() {
        return Err(Error::AuditSetup("audit pool is empty".into()));
    }
    let membership = shadow_memberships(pool.len(), shadow, seed)?;
    let base = derive_seed(seed, Stream::Shadow);

    let phi = membership
        .par_iter()
        .enumerate()
        .map(|(s, member)| {
            let mut m = Masks::unassigned(graph.num_nodes());
            m.val.clone_from(&masks.val);
            for (&v, &is_in) in pool.iter().zip(member) {
                if is_in {
                    m.train[v] = true;
                } else {
                    m.test[v] = true;
                }
            }
            let g = graph.clone().with_masks(m)?;
            let cfg = TrainConfig {
                seed: derive_seed(base, Stream::Custom(s as u64)),
                ..config.clone()
            };
            let spec = dp.map(|d| PrivacySpec {
                num_train: g.train_nodes().len(),
                noise_multiplier: None,
                ..d.clone()
            });
            let out = train(&g, &cfg, spec.as_ref())?;
            target_confidences(&g, &out.params, &pool)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(ShadowEnsemble { pool, membership, phi })
}

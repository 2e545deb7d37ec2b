use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::mia::shadows::ShadowEnsemble;

/// Lower bound on each fitted per-node variance.
pub const VARIANCE_FLOOR: f64 = 1e-3;

pub fn gaussian_log_density(x: f64, mean: f64, variance: f64) -> f64 {
    -0.5 * (2.0 * PI * variance).ln() - (x - mean).powi(2) / (2.0 * variance)
}

fn fit(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.max(VARIANCE_FLOOR))
}

/// Online LiRA score `log N(φ; μ_in, s_in) − log N(φ; μ_out, s_out)` for each
/// pool node, in pool order. Nodes with fewer than two IN or OUT shadows get
/// `None`.
pub fn lira_score(ensemble: &ShadowEnsemble, target_phi: &[f64]) -> Result<Vec<Option<f64>>> {
    if target_phi.len() != ensemble.pool.len() {
        return Err(Error::Shape(format!(
            "{} target confidences for a pool of {}",
            target_phi.len(),
            ensemble.pool.len()
        )));
    }
    let mut ins = Vec::with_capacity(ensemble.num_shadows());
    let mut outs = Vec::with_capacity(ensemble.num_shadows());
    Ok(target_phi
        .iter()
        .enumerate()
        .map(|(i, &obs)| {
            ins.clear();
            outs.clear();
            for (member, phi) in ensemble.membership.iter().zip(&ensemble.phi) {
                if member[i] {
                    ins.push(phi[i]);
                } else {
                    outs.push(phi[i]);
                }
            }
            if ins.len() < 2 || outs.len() < 2 {
                log::warn!(
                    "node {} has {} IN and {} OUT shadows; excluded from the attack",
                    ensemble.pool[i],
                    ins.len(),
                    outs.len()
                );
                return None;
            }
            let (mu_in, var_in) = fit(&ins);
            let (mu_out, var_out) = fit(&outs);
            Some(gaussian_log_density(obs, mu_in, var_in) - gaussian_log_density(obs, mu_out, var_out))
        })
        .collect())
}

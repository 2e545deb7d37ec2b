//! Rényi accountant for occurrence-bounded subgraph DP-SGD.
//!
//! One step samples `m` of the `N` training subgraphs without replacement.
//! A node sits in at most `T` of them, so the number `ρ` of affected
//! subgraphs in the batch is hypergeometric. Given `ρ`, the clipped sum moves
//! by at most `ρC` and the added noise has std `σC`, a Gaussian mechanism with
//! Rényi cost `αρ²/(2σ²)`. The per-step cost at order `α` is
//!
//! ```text
//! ε(α) = 1/(α−1) · ln Σ_ρ P[ρ] · exp(α(α−1)ρ²/(2σ²))
//! ```
//!
//! Steps compose additively and convert to (ε, δ) through
//! `ε = min_α [k·ε(α) + ln(1/δ)/(α−1)]`.

use serde::{Deserialize, Serialize};

use crate::dp::hypergeom::hypergeom_log_pmf;
use crate::error::{Error, Result};

/// Bracket for the noise-multiplier search.
pub const SIGMA_SEARCH_RANGE: (f64, f64) = (0.3, 1000.0);
const SIGMA_RELATIVE_SLACK: f64 = 1e-3;

/// Orders 1.25, 1.5, …, 64 followed by the integers 65..=512.
pub fn default_orders() -> Vec<f64> {
    let mut orders: Vec<f64> = (5..=256).map(|i| i as f64 * 0.25).collect();
    orders.extend((65..=512).map(|i| i as f64));
    orders
}

fn validate_sampling(population: usize, marked: usize, batch: usize) -> Result<()> {
    if population == 0 || batch == 0 || batch > population {
        return Err(Error::InvalidParameter(format!(
            "batch size {batch} must be in 1..={population}"
        )));
    }
    if marked > population {
        return Err(Error::InvalidParameter(format!(
            "occurrence bound {marked} exceeds {population} subgraphs"
        )));
    }
    Ok(())
}

fn log_sum_exp(terms: impl Iterator<Item = f64>) -> f64 {
    let terms: Vec<f64> = terms.collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// `(ρ, ln P[ρ])` over the support.
fn rho_law(population: usize, marked: usize, batch: usize) -> Vec<(f64, f64)> {
    (0..=marked.min(batch))
        .map(|rho| {
            let lp = hypergeom_log_pmf(population as u64, marked as u64, batch as u64, rho as u64);
            (rho as f64, lp)
        })
        .filter(|(_, lp)| lp.is_finite())
        .collect()
}

fn rdp_from_law(law: &[(f64, f64)], alpha: f64, sigma: f64) -> f64 {
    let scale = alpha * (alpha - 1.0) / (2.0 * sigma * sigma);
    let lse = log_sum_exp(law.iter().map(|&(rho, lp)| lp + scale * rho * rho));
    // ln Σ P[ρ] e^{…} ≥ 0 mathematically; clamp rounding below zero
    lse.max(0.0) / (alpha - 1.0)
}

/// Rényi cost of one step at order `alpha`.
pub fn per_step_rdp(alpha: f64, sigma: f64, population: usize, marked: usize, batch: usize) -> Result<f64> {
    if !(alpha > 1.0) {
        return Err(Error::InvalidParameter(format!("Rényi order {alpha} must exceed 1")));
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("noise multiplier {sigma} must be positive")));
    }
    validate_sampling(population, marked, batch)?;
    Ok(rdp_from_law(&rho_law(population, marked, batch), alpha, sigma))
}

/// Order grid, per-step cost at each order, and the number of steps composed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccountantState {
    pub orders: Vec<f64>,
    pub per_step: Vec<f64>,
    pub steps: usize,
}

impl AccountantState {
    pub fn new(sigma: f64, population: usize, marked: usize, batch: usize) -> Result<Self> {
        Self::with_orders(default_orders(), sigma, population, marked, batch)
    }

    pub fn with_orders(
        orders: Vec<f64>,
        sigma: f64,
        population: usize,
        marked: usize,
        batch: usize,
    ) -> Result<Self> {
        if let Some(&bad) = orders.iter().find(|&&a| !(a > 1.0)) {
            return Err(Error::InvalidParameter(format!("Rényi order {bad} must exceed 1")));
        }
        if !(sigma > 0.0) {
            return Err(Error::InvalidParameter(format!("noise multiplier {sigma} must be positive")));
        }
        validate_sampling(population, marked, batch)?;
        let law = rho_law(population, marked, batch);
        let per_step = orders.iter().map(|&a| rdp_from_law(&law, a, sigma)).collect();
        Ok(Self {
            orders,
            per_step,
            steps: 0,
        })
    }

    pub fn compose(&mut self, steps: usize) {
        self.steps += steps;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSpent {
    pub epsilon: f64,
    /// Order attaining the minimum; `None` when no step was composed.
    pub order: Option<f64>,
}

/// ε spent after `steps` further steps on top of `state`, at failure
/// probability `delta`. Zero steps spend nothing by convention.
pub fn compose_and_convert(state: &AccountantState, steps: usize, delta: f64) -> Result<EpsilonSpent> {
    if state.orders.is_empty() {
        return Err(Error::InvalidParameter("empty Rényi order grid".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta {delta} outside (0, 1)")));
    }
    let total_steps = state.steps + steps;
    if total_steps == 0 {
        return Ok(EpsilonSpent {
            epsilon: 0.0,
            order: None,
        });
    }
    let log_inv_delta = (1.0 / delta).ln();
    let (epsilon, order) = state
        .orders
        .iter()
        .zip(&state.per_step)
        .map(|(&a, &r)| (total_steps as f64 * r + log_inv_delta / (a - 1.0), a))
        .fold((f64::INFINITY, f64::NAN), |best, cur| if cur.0 < best.0 { cur } else { best });
    Ok(EpsilonSpent {
        epsilon,
        order: Some(order),
    })
}

/// Smallest noise multiplier in [`SIGMA_SEARCH_RANGE`] (to relative slack
/// 1e-3 in ε) whose accounted ε after `steps` steps stays within `epsilon_target`.
pub fn calibrate_sigma(
    epsilon_target: f64,
    delta: f64,
    steps: usize,
    population: usize,
    marked: usize,
    batch: usize,
) -> Result<f64> {
    if !(epsilon_target > 0.0) {
        return Err(Error::InvalidParameter(format!("target ε {epsilon_target} must be positive")));
    }
    let spent = |sigma: f64| -> Result<f64> {
        let state = AccountantState::new(sigma, population, marked, batch)?;
        Ok(compose_and_convert(&state, steps, delta)?.epsilon)
    };
    let (lo_bound, hi_bound) = SIGMA_SEARCH_RANGE;
    let at_hi = spent(hi_bound)?;
    if at_hi > epsilon_target {
        return Err(Error::Calibration(format!(
            "ε target {epsilon_target} unreachable: σ = {hi_bound} still spends ε = {at_hi:.4} \
             over {steps} steps (N = {population}, T = {marked}, m = {batch}, δ = {delta:e})"
        )));
    }
    if spent(lo_bound)? <= epsilon_target {
        return Ok(lo_bound);
    }
    let (mut lo, mut hi, mut eps_hi) = (lo_bound, hi_bound, at_hi);
    for _ in 0..200 {
        if (epsilon_target - eps_hi) / epsilon_target <= SIGMA_RELATIVE_SLACK || hi / lo - 1.0 < 1e-12 {
            break;
        }
        let mid = (lo * hi).sqrt();
        let eps_mid = spent(mid)?;
        if eps_mid <= epsilon_target {
            hi = mid;
            eps_hi = eps_mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

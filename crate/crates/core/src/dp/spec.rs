use serde::{Deserialize, Serialize};

use crate::dp::accountant::{calibrate_sigma, compose_and_convert, AccountantState, EpsilonSpent};
use crate::error::{Error, Result};

/// Everything the accountant and the DP training loop need for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacySpec {
    pub epsilon_target: f64,
    pub delta: f64,
    pub clip_norm: f64,
    /// `None` until calibrated.
    pub noise_multiplier: Option<f64>,
    pub max_degree: usize,
    pub hops: usize,
    pub occurrence_bound: usize,
    pub batch_size: usize,
    pub total_steps: usize,
    /// Number of training subgraphs (one per training node).
    pub num_train: usize,
}

impl PrivacySpec {
    /// Occurrence bound used when none is given: the root's own subgraph plus
    /// up to `K` appearances per hop level.
    pub fn default_occurrence_bound(max_degree: usize, hops: usize) -> usize {
        max_degree * hops + 1
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.epsilon_target > 0.0) {
            return bad(format!("ε = {} must be positive", self.epsilon_target));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("δ = {} outside (0, 1)", self.delta));
        }
        if !(self.clip_norm > 0.0) {
            return bad(format!("clip norm {} must be positive", self.clip_norm));
        }
        if let Some(s) = self.noise_multiplier {
            if !(s > 0.0) {
                return bad(format!("noise multiplier {s} must be positive"));
            }
        }
        if self.max_degree == 0 || self.occurrence_bound == 0 || self.hops == 0 {
            return bad("K, T and r must be at least 1".into());
        }
        if self.batch_size == 0 || self.batch_size > self.num_train {
            return bad(format!(
                "batch size {} must be in 1..={}",
                self.batch_size, self.num_train
            ));
        }
        Ok(())
    }

    /// The accountant's view of `T`: a node cannot sit in more subgraphs than exist.
    fn marked(&self) -> usize {
        self.occurrence_bound.min(self.num_train)
    }

    /// Solves for the noise multiplier and stores it.
    pub fn calibrate(&mut self) -> Result<f64> {
        self.validate()?;
        let sigma = calibrate_sigma(
            self.epsilon_target,
            self.delta,
            self.total_steps,
            self.num_train,
            self.marked(),
            self.batch_size,
        )?;
        self.noise_multiplier = Some(sigma);
        Ok(sigma)
    }

    pub fn accountant(&self) -> Result<AccountantState> {
        let sigma = self
            .noise_multiplier
            .ok_or_else(|| Error::Calibration("noise multiplier not calibrated".into()))?;
        AccountantState::new(sigma, self.num_train, self.marked(), self.batch_size)
    }

    /// ε spent after `steps` steps.
    pub fn epsilon_after(&self, steps: usize) -> Result<EpsilonSpent> {
        compose_and_convert(&self.accountant()?, steps, self.delta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> PrivacySpec {
        PrivacySpec {
            epsilon_target: 5.0,
            delta: 1.79e-4,
            clip_norm: 1.0,
            noise_multiplier: None,
            max_degree: 5,
            hops: 2,
            occurrence_bound: 6,
            batch_size: 64,
            total_steps: 1000,
            num_train: 560,
        }
    }

    #[test]
    fn default_bound() {
        assert_eq!(PrivacySpec::default_occurrence_bound(5, 2), 11);
    }

    #[test]
    fn calibrated_run_stays_within_budget() {
        let mut s = spec();
        let sigma = s.calibrate().unwrap();
        let spent = s.epsilon_after(s.total_steps).unwrap();
        assert!(spent.epsilon <= s.epsilon_target);
        assert!(spent.order.is_some());
        assert!(sigma > 1.0);
    }

    #[test]
    fn batch_larger_than_population_rejected() {
        let mut s = spec();
        s.batch_size = 600;
        assert!(s.validate().is_err());
    }

    #[test]
    fn uncalibrated_accountant_errors() {
        assert!(matches!(spec().accountant(), Err(Error::Calibration(_))));
    }
}

use serde::{Deserialize, Serialize};

/// Which hypothesis-testing bound to report as the adversary's supremum power.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerBound {
    /// `min(1, e^ε·α + δ)`.
    #[default]
    OneSided,
    /// `1 − max(0, 1 − δ − e^ε·α, e^−ε·(1 − δ − α))`, the full (ε, δ)
    /// trade-off curve.
    Tight,
}

/// Largest true-positive rate any membership test can reach at false-positive
/// rate `fpr` against an (ε, δ)-DP mechanism.
pub fn supremum_power(epsilon: f64, delta: f64, fpr: f64, bound: PowerBound) -> f64 {
    let fpr = fpr.clamp(0.0, 1.0);
    match bound {
        PowerBound::OneSided => (epsilon.exp() * fpr + delta).min(1.0),
        PowerBound::Tight => {
            let miss = (1.0 - delta - epsilon.exp() * fpr)
                .max((-epsilon).exp() * (1.0 - delta - fpr))
                .max(0.0);
            1.0 - miss
        }
    }
}

/// δ = 1 / (10 · n_train).
pub fn recommend_delta(num_train: usize) -> f64 {
    1.0 / (10.0 * num_train.max(1) as f64)
}

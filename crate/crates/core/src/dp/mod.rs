//! Node-level DP-SGD machinery.
//!
//! Training gradients are computed per sampled subgraph. The sampler bounds
//! how many subgraphs any node can appear in (the occurrence bound `T`), so
//! removing one node perturbs at most `ρ ≤ T` clipped gradients of a batch.
//! The accountant charges each step the Rényi cost of a Gaussian mechanism
//! with sensitivity `ρC`, averaged over the hypergeometric law of `ρ`.

mod accountant;
mod bound;
mod hypergeom;
mod mechanism;
mod sampler;
mod spec;

pub use accountant::{
    calibrate_sigma, compose_and_convert, default_orders, per_step_rdp, AccountantState, EpsilonSpent,
    SIGMA_SEARCH_RANGE,
};
pub use bound::{recommend_delta, supremum_power, PowerBound};
pub use hypergeom::{hypergeom_log_pmf, hypergeom_pmf, ln_choose};
pub use mechanism::{clip, clip_in_place, noisy_batch_gradient};
pub use sampler::{audit_occurrences, sample_training_subgraphs, OccurrenceAudit, SampledSubgraph};
pub use spec::PrivacySpec;

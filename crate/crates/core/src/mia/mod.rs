//! Likelihood-ratio membership inference against trained node classifiers,
//! with ROC analysis at low false-positive rates and a comparison to the
//! analytic power bound implied by (ε, δ).

mod audit;
mod lira;
mod roc;
mod shadows;

pub use audit::{audit, audit_with_ensemble, binomial_half_width, AttackReport, AuditConfig, BoundCheck, TargetInfo, REPORT_SCHEMA_VERSION};
pub use lira::{gaussian_log_density, lira_score, VARIANCE_FLOOR};
pub use roc::{roc, RocCurve, FPR_GRID};
pub use shadows::{
    phi, shadow_memberships, target_confidences, train_shadows, ShadowConfig, ShadowEnsemble, CONFIDENCE_CLAMP,
};

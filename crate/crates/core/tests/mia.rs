use dpgnn_core::gnn::{train, Regime, TrainConfig};
use dpgnn_core::graph::{assign_splits, generate_synthetic, PopulationGraph, SplitSpec, SyntheticSpec};
use dpgnn_core::mia::{
    audit_with_ensemble, lira_score, target_confidences, train_shadows, AuditConfig, ShadowConfig, TargetInfo,
};

fn small_graph() -> PopulationGraph {
    let spec = SyntheticSpec {
        num_nodes: 80,
        target_homophily: 0.6,
        seed: 5,
        ..SyntheticSpec::default()
    };
    let split = SplitSpec {
        train_fraction: 0.3,
        val_fraction: 0.4,
        test_fraction: 0.3,
        seed: 5,
    };
    assign_splits(generate_synthetic(&spec).unwrap().graph, &split).unwrap()
}

fn config() -> TrainConfig {
    TrainConfig {
        epochs: 30,
        hidden_dim: 16,
        select_checkpoint: false,
        eval_every: Some(30),
        seed: 11,
        ..TrainConfig::default()
    }
    .with_regime(Regime::NonDp)
}

#[test]
fn audit_is_deterministic_and_one_shadow_matters_little() {
    let g = small_graph();
    let cfg = config();
    let target = train(&g, &cfg, None).unwrap().params;
    let shadows = ShadowConfig::default();
    let a = train_shadows(&g, &cfg, None, &shadows, 3).unwrap();
    let b = train_shadows(&g, &cfg, None, &shadows, 3).unwrap();
    assert_eq!(a, b);

    let audit_cfg = AuditConfig {
        seed: 3,
        ..AuditConfig::default()
    };
    let info = TargetInfo::non_dp("non_dp");
    let r1 = audit_with_ensemble(&g, &target, &a, &info, &audit_cfg).unwrap();
    let r2 = audit_with_ensemble(&g, &target, &b, &info, &audit_cfg).unwrap();
    assert_eq!(r1.scores, r2.scores);
    assert_eq!(r1.n_members + r1.n_nonmembers, 48);

    // 128 against 127 shadows: the largest per-node change in Λ
    let phi = target_confidences(&g, &target, &a.pool).unwrap();
    let full = lira_score(&a, &phi).unwrap();
    let dropped = lira_score(&a.without_shadow(0), &phi).unwrap();
    let max_delta = full
        .iter()
        .zip(&dropped)
        .map(|(x, y)| (x.unwrap() - y.unwrap()).abs())
        .fold(0.0, f64::max);
    println!("max |ΔΛ| = {max_delta}");
    assert!((max_delta - DELTA_PIN).abs() < 1e-9, "{max_delta}");
}

const DELTA_PIN: f64 = 0.05758619184987146;

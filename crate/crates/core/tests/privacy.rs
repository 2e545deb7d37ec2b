use dpgnn_core::dp::{
    audit_occurrences, calibrate_sigma, compose_and_convert, default_orders, hypergeom_pmf, per_step_rdp,
    recommend_delta, sample_training_subgraphs, AccountantState,
};
use dpgnn_core::gnn::{train, Regime, TrainConfig};
use dpgnn_core::graph::{assign_splits, generate_synthetic, PopulationGraph, SplitSpec, SyntheticSpec};

fn synthetic(h: f64, seed: u64) -> PopulationGraph {
    let spec = SyntheticSpec {
        target_homophily: h,
        seed,
        ..SyntheticSpec::default()
    };
    assign_splits(generate_synthetic(&spec).unwrap().graph, &SplitSpec::default()).unwrap()
}

#[test]
fn hypergeometric_zero_overlap() {
    assert!((hypergeom_pmf(10, 2, 5, 0) - 56.0 / 252.0).abs() < 1e-12);
}

#[test]
fn direct_summation_oracle() {
    // Σ_ρ C(3,ρ)C(97,10−ρ)/C(100,10) · exp(8·7·ρ²/(2·16)), summed in plain arithmetic
    let choose = |n: u64, k: u64| -> f64 { (0..k).map(|i| (n - i) as f64 / (i + 1) as f64).product() };
    let total: f64 = (0..=3u64)
        .map(|rho| {
            choose(3, rho) * choose(97, 10 - rho) / choose(100, 10) * (56.0 * (rho * rho) as f64 / 32.0).exp()
        })
        .sum();
    let want = total.ln() / 7.0;
    let got = per_step_rdp(8.0, 4.0, 100, 3, 10).unwrap();
    assert!((got - want).abs() < 1e-12, "{got} vs {want}");
}

#[test]
fn single_shot_gaussian_conversion() {
    // one full-batch step, T = 1: ε = min_α α/(2σ²) + ln(1/δ)/(α − 1)
    let (sigma, delta) = (4.0, 1e-5);
    let state = AccountantState::new(sigma, 50, 1, 50).unwrap();
    let got = compose_and_convert(&state, 1, delta).unwrap();
    let log_inv = (1.0f64 / delta).ln();
    let grid_min = default_orders()
        .into_iter()
        .map(|a| a / (2.0 * sigma * sigma) + log_inv / (a - 1.0))
        .fold(f64::INFINITY, f64::min);
    assert!((got.epsilon - grid_min).abs() < 1e-12);
    // continuous optimum at α* = 1 + σ·sqrt(2 ln(1/δ))
    let continuous = 1.0 / (2.0 * sigma * sigma) + (2.0 * log_inv).sqrt() / sigma;
    assert!(got.epsilon >= continuous - 1e-12);
    assert!(got.epsilon - continuous < 1e-3, "{} vs {continuous}", got.epsilon);
    let a_star = 1.0 + sigma * (2.0 * log_inv).sqrt();
    assert!((got.order.unwrap() - a_star).abs() <= 0.25);
}

#[test]
fn synthetic_noise_multiplier_regression_pin() {
    let delta = recommend_delta(560);
    assert!((delta - 1.79e-4).abs() < 1e-6);
    let sigma = calibrate_sigma(5.0, delta, 1000, 560, 6, 64).unwrap();
    println!("σ = {sigma}");
    assert!((sigma - SIGMA_PIN).abs() < 1e-9, "σ = {sigma}");
}

const SIGMA_PIN: f64 = 30.943072026106588;

#[test]
fn occurrence_bound_is_reached_on_the_synthetic_graph() {
    let g = synthetic(0.9, 0);
    assert_eq!(g.train_nodes().len(), 560);
    for seed in 0..3 {
        let subs = sample_training_subgraphs(&g, 5, 2, 6, seed).unwrap();
        assert_eq!(subs.len(), 560);
        let audit = audit_occurrences(&subs, g.num_nodes());
        assert_eq!(audit.max_occurrence, 6);
        assert!(audit.max_children <= 5 && audit.max_hop <= 2);
    }
}

#[test]
fn dp_run_spends_at_most_its_budget() {
    let g = synthetic(0.9, 2);
    let cfg = TrainConfig {
        steps: 200,
        learning_rate: 1e-3,
        occurrence_bound: Some(6),
        ..TrainConfig::default()
    }
    .with_regime(Regime::Dp);
    let n = g.train_nodes().len();
    for eps in [1.0, 5.0] {
        let spec = cfg.privacy_spec(n, eps, recommend_delta(n));
        let out = train(&g, &cfg, Some(&spec)).unwrap();
        let last = out.log.last().unwrap();
        assert_eq!(last.step, 200);
        let spent = last.epsilon_spent.unwrap();
        assert!(spent <= eps && spent > 0.99 * eps, "ε spent {spent} for target {eps}");
        assert!(out.log.windows(2).all(|w| w[0].epsilon_spent <= w[1].epsilon_spent));
    }
}

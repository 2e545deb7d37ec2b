/// `ln C(n, k)`, summed term by term; `-inf` when `k > n`.
pub fn ln_choose(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    (0..k).map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln()).sum()
}

/// Log-probability that a uniform `m`-subset of `N` items contains exactly
/// `rho` of `T` marked items.
pub fn hypergeom_log_pmf(population: u64, marked: u64, draws: u64, rho: u64) -> f64 {
    if marked > population || draws > population {
        return f64::NEG_INFINITY;
    }
    if rho > marked || rho > draws || draws - rho > population - marked {
        return f64::NEG_INFINITY;
    }
    ln_choose(marked, rho) + ln_choose(population - marked, draws - rho) - ln_choose(population, draws)
}

/// `C(T, ρ)·C(N−T, m−ρ)/C(N, m)`, zero outside the support.
pub fn hypergeom_pmf(population: u64, marked: u64, draws: u64, rho: u64) -> f64 {
    hypergeom_log_pmf(population, marked, draws, rho).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn small_case_by_hand() {
        // C(8,5)/C(10,5) = 56/252
        assert!((hypergeom_pmf(10, 2, 5, 0) - 56.0 / 252.0).abs() < 1e-14);
        assert!((hypergeom_pmf(10, 2, 5, 1) - 2.0 * 70.0 / 252.0).abs() < 1e-14);
    }

    #[test]
    fn no_marked_items() {
        assert_eq!(hypergeom_pmf(10, 0, 4, 0), 1.0);
        assert_eq!(hypergeom_pmf(10, 0, 4, 1), 0.0);
    }

    #[test]
    fn out_of_support_is_zero() {
        assert_eq!(hypergeom_pmf(10, 2, 5, 3), 0.0);
        // 9 draws from 10 with 2 marked must hit at least one
        assert_eq!(hypergeom_pmf(10, 2, 9, 0), 0.0);
    }

    #[test]
    fn ln_choose_matches_exact() {
        assert!((ln_choose(52, 5) - 2_598_960f64.ln()).abs() < 1e-12);
        assert_eq!(ln_choose(7, 0), 0.0);
        assert_eq!(ln_choose(3, 4), f64::NEG_INFINITY);
    }

    proptest! {
        #[test]
        fn pmf_normalizes(n in 1u64..400, t_frac in 0.0f64..1.0, m_frac in 0.0f64..1.0) {
            let t = (t_frac * n as f64) as u64;
            let m = (m_frac * n as f64) as u64;
            let total: f64 = (0..=t.min(m)).map(|r| hypergeom_pmf(n, t, m, r)).sum();
            prop_assert!((total - 1.0).abs() < 1e-12, "sum {}", total);
        }
    }
}

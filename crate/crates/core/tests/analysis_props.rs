use polyreward::analysis::{
    frequency_table, jensen_remainder, rao_blackwell_table, split_estimator_stats, taylor_maker,
    taylor_uniform_failure, C0Rule, Gamma,
};
use polyreward::binom::{expected_value, variance};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn split_loses_to_full_sample_at_interior_p() {
    let mk = taylor_maker(C0Rule::Minimax, 1.0);
    for p in [0.3, 0.5] {
        let r = split_estimator_stats(64, 32, p, &mk, Gamma::Optimal).unwrap();
        assert!(r.var_split >= r.var_full, "p={p}: {} < {}", r.var_split, r.var_full);
        assert!(r.bias_split.abs() >= 2.0 * r.bias_full.abs(), "p={p}: {r:?}");
    }
}

#[test]
fn split_moments_agree_with_monte_carlo() {
    let (k1, k2, p) = (8usize, 8usize, 0.3);
    let mk = taylor_maker(C0Rule::Fallback, 1.0);
    let r = split_estimator_stats(k1 + k2, k1, p, &mk, Gamma::Optimal).unwrap();
    let base = mk(k1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 1_000_000;
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..n {
        let x1 = (0..k1).filter(|_| rng.gen_bool(p)).count();
        let x2 = (0..k2).filter(|_| rng.gen_bool(p)).count();
        let v = base.coeffs[x1] - r.gamma * (x1 as f64 / k1 as f64 - x2 as f64 / k2 as f64);
        s += v;
        s2 += v * v;
    }
    let mean = s / n as f64;
    let var = s2 / n as f64 - mean * mean;
    let se = (r.var_split / n as f64).sqrt();
    assert!((mean - r.mean_split).abs() <= 4.0 * se, "{mean} vs {}", r.mean_split);
    // Variance of the sample variance is bounded by the fourth moment; a loose 2% suffices here.
    assert!((var / r.var_split - 1.0).abs() < 0.02, "{var} vs {}", r.var_split);
}

#[test]
fn rao_blackwellisation_never_hurts() {
    let mk = taylor_maker(C0Rule::Minimax, 1.0);
    let base = mk(16).unwrap();
    for p in [0.05, 0.1, 0.3, 0.5, 0.8] {
        let r = split_estimator_stats(32, 16, p, &mk, Gamma::Optimal).unwrap();
        let rb = rao_blackwell_table(16, 16, &base, r.gamma).unwrap();
        assert!((expected_value(&rb, p) - r.mean_split).abs() < 1e-10);
        assert!(variance(&rb, p) <= r.var_split + 1e-12);
    }
}

#[test]
fn split_rejects_bad_inputs() {
    let mk = taylor_maker(C0Rule::Fallback, 1.0);
    assert!(split_estimator_stats(16, 0, 0.5, &mk, Gamma::Optimal).is_err());
    assert!(split_estimator_stats(16, 16, 0.5, &mk, Gamma::Optimal).is_err());
    assert!(split_estimator_stats(16, 8, 0.0, &mk, Gamma::Optimal).is_err());
    assert!(split_estimator_stats(16, 8, 1.0, &mk, Gamma::Optimal).is_err());
}

#[test]
fn taylor_report_shape() {
    let rows = taylor_uniform_failure(&[16, 32, 64, 128], C0Rule::Minimax).unwrap();
    assert!(rows[0].ratio_to_prev.is_none());
    for r in &rows {
        assert!(r.argmax_p <= 8.0 / r.k as f64, "K={}: argmax {}", r.k, r.argmax_p);
        assert!(r.sup_bias > r.epsilon_star);
    }
    let ks: Vec<f64> = rows.iter().map(|r| r.sup_bias_times_k).collect();
    let (lo, hi) = ks.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    assert!(hi / lo <= 3.0, "{ks:?}");
    for w in rows.windows(2) {
        assert!(w[1].sup_bias / w[1].epsilon_star > w[0].sup_bias / w[0].epsilon_star);
        assert!(w[1].pointwise_k2 <= w[0].pointwise_k2 * 1.05);
    }
    assert!(taylor_uniform_failure(&[32, 16], C0Rule::Minimax).is_err());
}

#[test]
fn fallback_taylor_halves_per_doubling() {
    let rows = taylor_uniform_failure(&[16, 32, 64, 128], C0Rule::Fallback).unwrap();
    for r in &rows[1..] {
        let ratio = r.ratio_to_prev.unwrap();
        assert!((0.4..=0.6).contains(&ratio), "K={}: {ratio}", r.k);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn frequency_split_is_unbiased_for_p(k1 in 2usize..20, k2 in 2usize..20, p in 0.01f64..0.99) {
        let r = split_estimator_stats(k1 + k2, k1, p, &|n| frequency_table(n), Gamma::Optimal).unwrap();
        prop_assert!((r.mean_split - p).abs() < 1e-12);
        prop_assert!((r.gamma - k2 as f64 / (k1 + k2) as f64).abs() < 1e-10);
        // The optimal control variate recovers the full-sample frequency.
        prop_assert!((r.var_split - p * (1.0 - p) / (k1 + k2) as f64).abs() < 1e-12);
    }

    #[test]
    fn jensen_remainder_is_finite(k in 2usize..200, p in 0.001f64..0.999) {
        prop_assert!(jensen_remainder(k, p).unwrap().is_finite());
    }
}

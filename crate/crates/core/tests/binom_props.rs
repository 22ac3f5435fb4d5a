use num_rational::BigRational;
use polyreward::analysis::jensen_remainder;
use polyreward::binom::*;
use polyreward::grid::{build_grid, Scheme};
use polyreward::{EstimatorTable, Method};
use proptest::prelude::*;

fn table(coeffs: Vec<f64>) -> EstimatorTable {
    EstimatorTable::new(coeffs.len() - 1, 1.0, Method::UStatistic, coeffs).unwrap()
}

fn coeffs(max_k: usize) -> impl Strategy<Value = Vec<f64>> {
    (1..=max_k).prop_flat_map(|k| prop::collection::vec(-10.0..10.0f64, k + 1))
}

proptest! {
    #[test]
    fn partition_of_unity(k in 1usize..=256, p in 0.0..=1.0f64) {
        let s: f64 = bernstein_row(k, p).iter().sum();
        prop_assert!((s - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn basis_stays_in_unit_interval(k in 1usize..=256, j in 0usize..=256, p in 0.0..=1.0f64) {
        let j = j % (k + 1);
        let b = bernstein_basis(k, j, p).unwrap();
        prop_assert!((0.0..=1.0).contains(&b));
    }

    #[test]
    fn expectation_is_linear(c in coeffs(40), a in -3.0..3.0f64, b in -3.0..3.0f64, p in 0.0..=1.0f64, seed in any::<u64>()) {
        let d: Vec<f64> = c.iter().enumerate().map(|(i, x)| (x * 1.7 + (seed.wrapping_mul(i as u64 + 1) % 97) as f64 / 10.0).sin()).collect();
        let mix: Vec<f64> = c.iter().zip(&d).map(|(x, y)| a * x + b * y).collect();
        let lhs = expected_value(&table(mix), p);
        let rhs = a * expected_value(&table(c.clone()), p) + b * expected_value(&table(d), p);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + c.iter().fold(0.0f64, |m, x| m.max(x.abs())) * (a.abs() + b.abs())));
    }

    #[test]
    fn variance_is_nonnegative(c in coeffs(64), p in 0.0..=1.0f64) {
        prop_assert!(variance(&table(c), p) >= -1e-12);
    }

    #[test]
    fn rational_oracle_agrees(c in coeffs(12), j in 0usize..5) {
        let p = BigRational::new((j as i64).into(), 4.into());
        let exact = expected_value_exact(&c.iter().map(|&x| to_rational(x)).collect::<Vec<_>>(), &p);
        let approx = expected_value(&table(c.clone()), j as f64 / 4.0);
        let exact_f = exact.numer().to_string().parse::<f64>().unwrap() / exact.denom().to_string().parse::<f64>().unwrap();
        prop_assert!((approx - exact_f).abs() <= 1e-12 * (1.0 + exact_f.abs()));
    }

    #[test]
    fn profile_suprema_match_stored_values(c in coeffs(20), m in 11usize..200) {
        let t = table(c);
        let g = build_grid(t.k, m, Scheme::BoundaryRefined).unwrap();
        let prof = bias_profile(&t, &g);
        prop_assert_eq!(prof.weighted_bias.len(), g.len());
        prop_assert_eq!(prof.second_moment.len(), g.len());
        prop_assert_eq!(prof.weighted_bias[0], 0.0);
        prop_assert_eq!(prof.sup_bias, prof.weighted_bias.iter().fold(0.0f64, |m, x| m.max(x.abs())));
        prop_assert_eq!(prof.sup_second_moment, prof.second_moment.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    }
}

#[test]
fn basis_matches_high_precision_power() {
    let b = bernstein_basis(16, 16, 0.9).unwrap();
    assert!((b / 0.185_302_018_885_184_1 - 1.0).abs() < 1e-13);
    assert!(bernstein_basis(4, 5, 0.5).is_err());
    assert!(bernstein_basis(4, 2, 1.5).is_err());
}

#[test]
fn jensen_gap_is_second_order() {
    let errs: Vec<f64> = [64, 128, 256].iter().map(|&k| jensen_remainder(k, 0.5).unwrap().abs()).collect();
    for w in errs.windows(2) {
        let r = w[1] / w[0];
        assert!((0.15..=0.35).contains(&r), "ratio {r}");
    }
}

//! Exact studies of sample splitting and of the Taylor-corrected log.

use crate::binom::{bernstein_row, expected_value, gradient_weighted_bias, ln_choose, p_log_p, variance};
use crate::error::{domain, input, Result};
use crate::estimators::{fallback_c0, taylor_bt_table};
use crate::grid::default_grid;
use crate::remez::remez_minimax;
use crate::table::{EstimatorTable, Method};

fn check_interior(p: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return domain(format!("p = {p} is degenerate: the split difference has zero variance"));
    }
    Ok(())
}

/// `γ* = Cov(R(X1), p̂1 - p̂2) / Var(p̂1 - p̂2)` by enumeration of both counts.
pub fn optimal_gamma(k1: usize, k2: usize, p: f64, base: &EstimatorTable) -> Result<f64> {
    check_interior(p)?;
    if base.k != k1 {
        return input(format!("base table has K = {}, expected K1 = {k1}", base.k));
    }
    let w1 = bernstein_row(k1, p);
    let w2 = bernstein_row(k2, p);
    let (mut mr, mut md) = (0.0, 0.0);
    for (x1, a) in w1.iter().enumerate() {
        for (x2, b) in w2.iter().enumerate() {
            let w = a * b;
            mr += w * base.coeffs[x1];
            md += w * (x1 as f64 / k1 as f64 - x2 as f64 / k2 as f64);
        }
    }
    let (mut cov, mut var) = (0.0, 0.0);
    for (x1, a) in w1.iter().enumerate() {
        for (x2, b) in w2.iter().enumerate() {
            let w = a * b;
            let d = x1 as f64 / k1 as f64 - x2 as f64 / k2 as f64 - md;
            cov += w * (base.coeffs[x1] - mr) * d;
            var += w * d * d;
        }
    }
    Ok(cov / var)
}

#[derive(Debug, Clone, Copy)]
pub enum Gamma {
    Optimal,
    Value(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitReport {
    pub k: usize,
    pub k1: usize,
    pub k2: usize,
    pub p: f64,
    pub gamma: f64,
    pub mean_split: f64,
    pub var_split: f64,
    pub var_full: f64,
    /// Gradient-weighted bias `p E[R] - β p ln p`.
    pub bias_split: f64,
    pub bias_full: f64,
}

/// Exact moments of `R_split = R(X1) - γ (p̂1 - p̂2)` and of the same-method
/// table on all `K` samples. `make_table(n)` builds the base table for `n`.
pub fn split_estimator_stats(
    k: usize,
    k1: usize,
    p: f64,
    make_table: &dyn Fn(usize) -> Result<EstimatorTable>,
    gamma: Gamma,
) -> Result<SplitReport> {
    if !(1 <= k1 && k1 < k) {
        return input(format!("need 1 <= K1 < K, got K1 = {k1}, K = {k}"));
    }
    check_interior(p)?;
    let k2 = k - k1;
    let base = make_table(k1)?;
    let full = make_table(k)?;
    let gamma = match gamma {
        Gamma::Optimal => optimal_gamma(k1, k2, p, &base)?,
        Gamma::Value(g) => g,
    };
    let w1 = bernstein_row(k1, p);
    let w2 = bernstein_row(k2, p);
    let value = |x1: usize, x2: usize| base.coeffs[x1] - gamma * (x1 as f64 / k1 as f64 - x2 as f64 / k2 as f64);
    let mut mean = 0.0;
    for (x1, a) in w1.iter().enumerate() {
        for (x2, b) in w2.iter().enumerate() {
            mean += a * b * value(x1, x2);
        }
    }
    let mut var = 0.0;
    for (x1, a) in w1.iter().enumerate() {
        for (x2, b) in w2.iter().enumerate() {
            let d = value(x1, x2) - mean;
            var += a * b * d * d;
        }
    }
    let target = base.beta * p_log_p(p);
    Ok(SplitReport {
        k,
        k1,
        k2,
        p,
        gamma,
        mean_split: mean,
        var_split: var,
        var_full: variance(&full, p),
        bias_split: p * mean - target,
        bias_full: gradient_weighted_bias(&full, p),
    })
}

/// `E[R_split | X1 + X2 = x]` as a table on `K = K1 + K2` samples; the
/// conditional law of `X1` is hypergeometric and does not depend on `p`.
pub fn rao_blackwell_table(k1: usize, k2: usize, base: &EstimatorTable, gamma: f64) -> Result<EstimatorTable> {
    if base.k != k1 {
        return input(format!("base table has K = {}, expected K1 = {k1}", base.k));
    }
    let k = k1 + k2;
    let coeffs = (0..=k)
        .map(|x| {
            let lo = x.saturating_sub(k2);
            let hi = x.min(k1);
            let lc = ln_choose(k, x);
            (lo..=hi)
                .map(|a| {
                    let h = (ln_choose(k1, a) + ln_choose(k2, x - a) - lc).exp();
                    let d = a as f64 / k1 as f64 - (x - a) as f64 / k2 as f64;
                    h * (base.coeffs[a] - gamma * d)
                })
                .sum()
        })
        .collect();
    Ok(EstimatorTable::new(k, base.beta, base.method, coeffs)?
        .with_meta("rao_blackwell", true)
        .with_meta("k1", k1)
        .with_meta("gamma", gamma))
}

/// Boundary value rule for the Taylor-corrected table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum C0Rule {
    /// `P*(0)` of the minimax polynomial.
    Minimax,
    /// `-ln K - 1/2`.
    Fallback,
    Value(f64),
}

impl C0Rule {
    pub fn parse(s: &str) -> Result<C0Rule> {
        match s {
            "minimax" => Ok(C0Rule::Minimax),
            "fallback" => Ok(C0Rule::Fallback),
            other => other
                .parse::<f64>()
                .map(C0Rule::Value)
                .map_err(|_| crate::Error::Input(format!("c0 rule must be minimax, fallback or a number, got `{other}`"))),
        }
    }

    pub fn c0(self, k: usize) -> Result<f64> {
        match self {
            C0Rule::Minimax => Ok(remez_minimax(k, 100)?.c0()),
            C0Rule::Fallback => Ok(fallback_c0(k)),
            C0Rule::Value(v) => Ok(v),
        }
    }
}

/// Taylor table builder for a `C0Rule`, as used by the split study.
pub fn taylor_maker(rule: C0Rule, beta: f64) -> impl Fn(usize) -> Result<EstimatorTable> {
    move |k| taylor_bt_table(k, beta, rule.c0(k)?)
}

#[derive(Debug, Clone)]
pub struct TaylorRow {
    pub k: usize,
    pub c0: f64,
    /// Sup weighted bias over the default grid.
    pub sup_bias: f64,
    pub argmax_p: f64,
    /// `|P(1/2) - ln(1/2)| K^2`.
    pub pointwise_k2: f64,
    pub sup_bias_times_k: f64,
    /// Continuum minimax bias `ε*(K)`.
    pub epsilon_star: f64,
    pub ratio_to_prev: Option<f64>,
}

pub fn taylor_uniform_failure(ks: &[usize], rule: C0Rule) -> Result<Vec<TaylorRow>> {
    if ks.windows(2).any(|w| w[0] >= w[1]) {
        return input("Ks must be strictly increasing");
    }
    let mut rows: Vec<TaylorRow> = Vec::with_capacity(ks.len());
    for &k in ks {
        let remez = remez_minimax(k, 100)?;
        let c0 = match rule {
            C0Rule::Minimax => remez.c0(),
            other => other.c0(k)?,
        };
        let t = taylor_bt_table(k, 1.0, c0)?;
        let prof = crate::binom::bias_profile(&t, &default_grid(k));
        let pointwise_k2 = (expected_value(&t, 0.5) - 0.5f64.ln()).abs() * (k * k) as f64;
        let ratio_to_prev = rows.last().map(|r| prof.sup_bias / r.sup_bias);
        rows.push(TaylorRow {
            k,
            c0,
            sup_bias: prof.sup_bias,
            argmax_p: prof.argmax_bias(),
            pointwise_k2,
            sup_bias_times_k: prof.sup_bias * k as f64,
            epsilon_star: remez.epsilon,
            ratio_to_prev,
        });
    }
    Ok(rows)
}

/// `E[ln(X/K) | X >= 1] - ln p + (1 - p)/(2 K p)`: what is left of the
/// plug-in log's bias after the leading curvature term.
pub fn jensen_remainder(k: usize, p: f64) -> Result<f64> {
    check_interior(p)?;
    let w = bernstein_row(k, p);
    let mass: f64 = w[1..].iter().sum();
    let m: f64 = (1..=k).map(|x| w[x] * (x as f64 / k as f64).ln()).sum::<f64>() / mass;
    Ok(m - p.ln() + (1.0 - p) / (2.0 * k as f64 * p))
}

/// Identity-on-frequency table `c_x = x / K`.
pub fn frequency_table(k: usize) -> Result<EstimatorTable> {
    EstimatorTable::new(k, 1.0, Method::UStatistic, (0..=k).map(|x| x as f64 / k as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_of_frequency_table_is_k2_over_k() {
        for (k1, k2, p) in [(32, 32, 0.5), (10, 30, 0.2), (7, 3, 0.9)] {
            let g = optimal_gamma(k1, k2, p, &frequency_table(k1).unwrap()).unwrap();
            assert!((g - k2 as f64 / (k1 + k2) as f64).abs() < 1e-12, "{g}");
        }
    }

    #[test]
    fn gamma_of_constant_table_is_zero() {
        let t = EstimatorTable::new(8, 1.0, Method::UStatistic, vec![3.5; 9]).unwrap();
        assert!(optimal_gamma(8, 8, 0.3, &t).unwrap().abs() < 1e-12);
    }

    #[test]
    fn gamma_matches_leading_order() {
        let t = taylor_bt_table(32, 1.0, fallback_c0(32)).unwrap();
        let g = optimal_gamma(32, 32, 0.5, &t).unwrap();
        assert!((g - 1.0).abs() < 0.15, "{g}");
    }

    #[test]
    fn degenerate_p_is_a_domain_error() {
        let t = frequency_table(4).unwrap();
        assert!(optimal_gamma(4, 4, 0.0, &t).is_err());
        assert!(optimal_gamma(4, 4, 1.0, &t).is_err());
    }

    #[test]
    fn zero_gamma_reproduces_base_variance() {
        let mk = taylor_maker(C0Rule::Fallback, 1.0);
        let r = split_estimator_stats(20, 8, 0.4, &mk, Gamma::Value(0.0)).unwrap();
        let base = mk(8).unwrap();
        assert!((r.var_split - variance(&base, 0.4)).abs() < 1e-12);
    }

    #[test]
    fn rao_blackwell_keeps_mean_and_lowers_variance() {
        let mk = taylor_maker(C0Rule::Fallback, 1.0);
        let base = mk(12).unwrap();
        for p in [0.1, 0.3, 0.5] {
            let r = split_estimator_stats(24, 12, p, &mk, Gamma::Optimal).unwrap();
            let rb = rao_blackwell_table(12, 12, &base, r.gamma).unwrap();
            assert!((expected_value(&rb, p) - r.mean_split).abs() < 1e-12);
            assert!(variance(&rb, p) <= r.var_split + 1e-12);
        }
    }

    #[test]
    fn c0_rules() {
        assert_eq!(C0Rule::parse("fallback").unwrap().c0(16).unwrap(), fallback_c0(16));
        assert_eq!(C0Rule::parse("-3").unwrap(), C0Rule::Value(-3.0));
        assert!((C0Rule::Minimax.c0(16).unwrap() + 5.994_04).abs() < 1e-4);
        assert!(C0Rule::parse("median").is_err());
    }
}

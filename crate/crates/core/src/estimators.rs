//! Closed-form estimator tables.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{domain, input, Result};
use crate::table::{EstimatorTable, Method};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    /// `s = -1`
    Coherence,
    /// `s = +1`
    Diversity,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Coherence => -1.0,
            Sign::Diversity => 1.0,
        }
    }

    pub fn parse(s: &str) -> Result<Sign> {
        match s.trim() {
            "+1" | "1" | "diversity" => Ok(Sign::Diversity),
            "-1" | "coherence" => Ok(Sign::Coherence),
            other => input(format!("sign must be +1 or -1, got `{other}`")),
        }
    }
}

/// Dual map `u(q) = s β Σ_m c_m q^m` of a separable polynomial potential.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialReward {
    /// `c_1..c_d`
    pub coeffs: Vec<f64>,
    pub sign: Sign,
    pub beta: f64,
}

impl PolynomialReward {
    pub fn new(coeffs: Vec<f64>, sign: Sign, beta: f64) -> Result<Self> {
        if coeffs.is_empty() {
            return input("polynomial reward needs at least one coefficient");
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return input(format!("beta must be positive, got {beta}"));
        }
        let r = PolynomialReward { coeffs, sign, beta };
        if !r.is_strictly_convex() {
            return domain("generating function is not strictly convex on (0, 1]");
        }
        Ok(r)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len()
    }

    /// `Σ_m m c_m x^(m-1) > 0` on a 1024-point grid of `(0, 1]`.
    pub fn is_strictly_convex(&self) -> bool {
        (1..=1024).all(|i| {
            let x = i as f64 / 1024.0;
            let d: f64 = self
                .coeffs
                .iter()
                .enumerate()
                .map(|(j, c)| (j + 1) as f64 * c * x.powi(j as i32))
                .sum();
            d > 0.0
        })
    }

    /// `Σ_m c_m q^m`
    pub fn poly(&self, q: f64) -> f64 {
        self.coeffs.iter().enumerate().map(|(j, c)| c * q.powi(j as i32 + 1)).sum()
    }

    /// Constant added to the table so that diversity rewards stay nonnegative.
    pub fn shift(&self) -> f64 {
        match self.sign {
            Sign::Diversity => self.beta * self.coeffs.iter().sum::<f64>(),
            Sign::Coherence => 0.0,
        }
    }

    /// Mean of the U-statistic table: `shift - s β Σ c_m p^m`.
    pub fn target(&self, p: f64) -> f64 {
        self.shift() - self.sign.value() * self.beta * self.poly(p)
    }
}

/// `X(X-1)...(X-m+1) / (K(K-1)...(K-m+1))`, the unbiased estimator of `p^m`.
pub fn falling_factorial_estimate(x: usize, k: usize, m: usize) -> Result<f64> {
    if m == 0 || m > k {
        return domain(format!("no unbiased estimator of p^{m} from {k} samples"));
    }
    if x > k {
        return domain(format!("count {x} exceeds group size {k}"));
    }
    if x < m {
        return Ok(0.0);
    }
    let mut v = 1.0;
    for i in 0..m {
        v *= (x - i) as f64 / (k - i) as f64;
    }
    Ok(v)
}

pub fn falling_factorial_exact(x: usize, k: usize, m: usize) -> BigRational {
    if x < m {
        return BigRational::zero();
    }
    let mut v = BigRational::one();
    for i in 0..m {
        v *= BigRational::new(BigInt::from(x - i), BigInt::from(k - i));
    }
    v
}

/// Minimum-variance unbiased table for `-s β Σ c_m p^m` (plus the diversity
/// shift recorded in `meta.shift`).
pub fn u_statistic_table(reward: &PolynomialReward, k: usize) -> Result<EstimatorTable> {
    let d = reward.degree();
    if d > k {
        return domain(format!("degree {d} exceeds group size {k}: no unbiased estimator"));
    }
    let s = reward.sign.value();
    let shift = reward.shift();
    let coeffs = (0..=k)
        .map(|x| {
            let mut acc = 0.0;
            for (j, c) in reward.coeffs.iter().enumerate() {
                acc += c * falling_factorial_estimate(x, k, j + 1)?;
            }
            Ok(shift - s * reward.beta * acc)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(EstimatorTable::new(k, reward.beta, Method::UStatistic, coeffs)?
        .with_meta("degree", d)
        .with_meta("poly_coeffs", reward.coeffs.clone())
        .with_meta("sign", s)
        .with_meta("shift", shift))
}

/// Exact rational coefficients of the U-statistic table, for rational `c_m`.
pub fn u_statistic_exact(coeffs: &[BigRational], sign: Sign, beta: &BigRational, k: usize) -> Vec<BigRational> {
    let shift = match sign {
        Sign::Diversity => beta * coeffs.iter().fold(BigRational::zero(), |a, c| a + c),
        Sign::Coherence => BigRational::zero(),
    };
    let s = BigRational::from_integer(BigInt::from(sign.value() as i64));
    (0..=k)
        .map(|x| {
            let acc = coeffs
                .iter()
                .enumerate()
                .fold(BigRational::zero(), |a, (j, c)| a + c * falling_factorial_exact(x, k, j + 1));
            &shift - &s * beta * acc
        })
        .collect()
}

/// Laplace-smoothed plug-in `β ln((X + α) / (K + α |Z|))`. With `α = 0` the
/// `X = 0` entry is undefined and is only accepted with `clamp`, which sets
/// `c_0 := c_1`.
pub fn plugin_log_table(k: usize, beta: f64, alpha: f64, z_size: usize, clamp: bool) -> Result<EstimatorTable> {
    if z_size < 2 {
        return input(format!("answer space needs at least 2 elements, got {z_size}"));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return input(format!("alpha must be a nonnegative number, got {alpha}"));
    }
    if alpha == 0.0 && !clamp {
        return domain("alpha = 0 leaves log(0) at X = 0; request clamping to use c_0 = c_1");
    }
    let denom = k as f64 + alpha * z_size as f64;
    let mut coeffs: Vec<f64> = (0..=k).map(|x| beta * ((x as f64 + alpha) / denom).ln()).collect();
    let clamped = alpha == 0.0;
    if clamped {
        coeffs[0] = coeffs[1];
    }
    Ok(EstimatorTable::new(k, beta, Method::PluginLog, coeffs)?
        .with_meta("alpha", alpha)
        .with_meta("z_size", z_size)
        .with_meta("clamped", clamped))
}

/// Boundary-corrected Taylor table: `β c0` at `X = 0`, otherwise
/// `β (ln(X/K) + (K - X) / (2 K X))`.
pub fn taylor_bt_table(k: usize, beta: f64, c0: f64) -> Result<EstimatorTable> {
    if k == 0 {
        return input("K must be positive");
    }
    let kf = k as f64;
    let coeffs = (0..=k)
        .map(|x| {
            if x == 0 {
                beta * c0
            } else {
                let xf = x as f64;
                beta * ((xf / kf).ln() + (kf - xf) / (2.0 * kf * xf))
            }
        })
        .collect();
    Ok(EstimatorTable::new(k, beta, Method::TaylorBt, coeffs)?.with_meta("c0", c0))
}

/// Boundary value used when no minimax solve is available.
pub fn fallback_c0(k: usize) -> f64 {
    -(k as f64).ln() - 0.5
}

/// The Euclidean diversity table `β (1 - X/K)` (degree-one U-statistic).
pub fn euclid_table(k: usize, beta: f64) -> Result<EstimatorTable> {
    let r = PolynomialReward::new(vec![1.0], Sign::Diversity, beta)?;
    let mut t = u_statistic_table(&r, k)?;
    t.method = Method::Euclid;
    Ok(t)
}

/// The quadratic reward `β X(X-1) / (K(K-1))` (degree-two U-statistic).
pub fn quadratic_table(k: usize, beta: f64) -> Result<EstimatorTable> {
    let r = PolynomialReward::new(vec![0.0, 1.0], Sign::Coherence, beta)?;
    let mut t = u_statistic_table(&r, k)?;
    t.method = Method::Quadratic;
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binom::expected_value;

    #[test]
    fn falling_factorial_examples() {
        assert_eq!(falling_factorial_estimate(3, 4, 2).unwrap(), 0.5);
        assert_eq!(falling_factorial_estimate(1, 4, 2).unwrap(), 0.0);
        assert_eq!(falling_factorial_estimate(4, 4, 4).unwrap(), 1.0);
        assert!(falling_factorial_estimate(2, 4, 5).is_err());
    }

    #[test]
    fn example_one_euclid_diversity() {
        let r = PolynomialReward::new(vec![1.0], Sign::Diversity, 1.0).unwrap();
        let t = u_statistic_table(&r, 4).unwrap();
        assert_eq!(t.coeffs, vec![1.0, 0.75, 0.5, 0.25, 0.0]);
        assert_eq!(t.meta_f64("shift"), Some(1.0));
    }

    #[test]
    fn example_two_quadratic() {
        let t = quadratic_table(2, 1.0).unwrap();
        assert_eq!(t.coeffs, vec![0.0, 0.0, 1.0]);
        assert!((expected_value(&t, 0.5) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn degree_above_k_is_rejected() {
        let r = PolynomialReward::new(vec![0.0, 0.0, 1.0], Sign::Coherence, 1.0).unwrap();
        assert!(u_statistic_table(&r, 2).is_err());
    }

    #[test]
    fn nonconvex_generator_is_rejected() {
        assert!(PolynomialReward::new(vec![-1.0], Sign::Diversity, 1.0).is_err());
        assert!(PolynomialReward::new(vec![1.0, -1.0], Sign::Diversity, 1.0).is_err());
    }

    #[test]
    fn plugin_examples() {
        let t = plugin_log_table(16, 1.0, 1.0, 2, false).unwrap();
        assert!((t.coeffs[0] - (-2.890_371_757_896_165)).abs() < 1e-10);
        assert!((t.coeffs[16] - (-0.057_158_413_839_948_6)).abs() < 1e-10);
        // Exact Bernstein sum (scipy binomial pmf): -0.7199463016334109.
        assert!((expected_value(&t, 0.5) - (-0.719_946_301_633_410_9)).abs() < 1e-14);
        assert!(plugin_log_table(16, 1.0, 0.0, 2, false).is_err());
        let c = plugin_log_table(16, 1.0, 0.0, 2, true).unwrap();
        assert_eq!(c.coeffs[0], c.coeffs[1]);
        assert_eq!(c.meta.get("clamped"), Some(&serde_json::Value::Bool(true)));
    }

    #[test]
    fn taylor_examples() {
        let t = taylor_bt_table(16, 1.0, -6.0).unwrap();
        assert!((t.coeffs[8] - (-0.661_897_2)).abs() < 1e-7);
        assert_eq!(t.coeffs[16], 0.0);
        assert_eq!(t.coeffs[0], -6.0);
        let t = taylor_bt_table(4, 2.0, -1.0).unwrap();
        assert!((t.coeffs[1] - (-2.022_588_8)).abs() < 1e-7);
    }

    #[test]
    fn closed_forms_are_monotone_above_zero() {
        for k in [2, 5, 16, 64, 128] {
            for t in [
                taylor_bt_table(k, 1.0, fallback_c0(k)).unwrap(),
                plugin_log_table(k, 1.3, 0.5, 3, false).unwrap(),
            ] {
                assert!(t.coeffs[1..].windows(2).all(|w| w[0] <= w[1]));
            }
        }
    }
}

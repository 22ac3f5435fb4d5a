//! Bernstein-basis moments of binomial counts.
//!
//! The basis is evaluated in log space; polynomial values use a compensated
//! de Casteljau recurrence, which stays accurate even when the coefficients
//! are large and of alternating sign.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{domain, Result};
use crate::grid::Grid;
use crate::table::EstimatorTable;

/// `ln C(n, k)`.
pub fn ln_choose(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut s = KahanSum::default();
    for i in 1..=k {
        s.add(((n - k + i) as f64 / i as f64).ln());
    }
    s.value()
}

/// `B_{k,K}(p) = C(K,k) p^k (1-p)^(K-k)`.
pub fn bernstein_basis(big_k: usize, k: usize, p: f64) -> Result<f64> {
    if k > big_k {
        return domain(format!("basis index {k} exceeds K = {big_k}"));
    }
    if !(0.0..=1.0).contains(&p) {
        return domain(format!("p = {p} outside [0, 1]"));
    }
    Ok(basis_unchecked(big_k, k, p))
}

fn basis_unchecked(big_k: usize, k: usize, p: f64) -> f64 {
    if p == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if p == 1.0 {
        return if k == big_k { 1.0 } else { 0.0 };
    }
    let lp = ln_choose(big_k, k) + k as f64 * p.ln() + (big_k - k) as f64 * (-p).ln_1p();
    lp.exp()
}

/// All `K+1` basis values at `p`.
pub fn bernstein_row(big_k: usize, p: f64) -> Vec<f64> {
    (0..=big_k).map(|k| basis_unchecked(big_k, k, p)).collect()
}

#[derive(Debug, Default, Clone, Copy)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// `Σ c_k B_{k,K}(p)` by compensated de Casteljau (roughly twice the working
/// precision).
pub fn bernstein_eval(coeffs: &[f64], p: f64) -> f64 {
    let n = coeffs.len();
    if n == 1 {
        return coeffs[0];
    }
    let (r, rho) = two_sum(1.0, -p);
    let mut b = coeffs.to_vec();
    let mut e = vec![0.0; n];
    for j in 1..n {
        for i in 0..n - j {
            let (s1, pi1) = two_prod(r, b[i]);
            let (s2, pi2) = two_prod(p, b[i + 1]);
            let (s, sigma) = two_sum(s1, s2);
            let err = r * e[i] + p * e[i + 1] + (pi1 + pi2 + sigma + rho * b[i]);
            b[i] = s;
            e[i] = err;
        }
    }
    b[0] + e[0]
}

/// `P_c(p)`: the mean of the table under `Binomial(K, p)`.
pub fn expected_value(table: &EstimatorTable, p: f64) -> f64 {
    bernstein_eval(&table.coeffs, p)
}

/// `S(c, p) = Σ c_k^2 B_{k,K}(p)`.
pub fn second_moment(table: &EstimatorTable, p: f64) -> f64 {
    let sq: Vec<f64> = table.coeffs.iter().map(|c| c * c).collect();
    bernstein_eval(&sq, p)
}

pub fn variance(table: &EstimatorTable, p: f64) -> f64 {
    let m = expected_value(table, p);
    second_moment(table, p) - m * m
}

/// `p ln p` with the continuous extension 0 at `p = 0`.
pub fn p_log_p(p: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else {
        p * p.ln()
    }
}

/// `p P_c(p) - β p ln p`; exactly 0 at `p = 0`.
pub fn gradient_weighted_bias(table: &EstimatorTable, p: f64) -> f64 {
    if p == 0.0 {
        return 0.0;
    }
    p * expected_value(table, p) - table.beta * p_log_p(p)
}

#[derive(Debug, Clone)]
pub struct BiasProfile {
    pub grid: Grid,
    pub weighted_bias: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub sup_bias: f64,
    pub sup_second_moment: f64,
}

impl BiasProfile {
    /// Grid point attaining `sup_bias`.
    pub fn argmax_bias(&self) -> f64 {
        let i = argmax_abs(&self.weighted_bias);
        self.grid.points[i]
    }
}

fn argmax_abs(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    best
}

pub fn bias_profile(table: &EstimatorTable, grid: &Grid) -> BiasProfile {
    let weighted_bias: Vec<f64> = grid.points.iter().map(|&p| gradient_weighted_bias(table, p)).collect();
    let second: Vec<f64> = grid.points.iter().map(|&p| second_moment(table, p)).collect();
    let sup_bias = weighted_bias.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let sup_second_moment = second.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    BiasProfile { grid: grid.clone(), weighted_bias, second_moment: second, sup_bias, sup_second_moment }
}

/// `max |p P_c(p) - β p ln p|` over the grid.
pub fn sup_bias(table: &EstimatorTable, grid: &Grid) -> f64 {
    grid.points.iter().fold(0.0f64, |m, &p| m.max(gradient_weighted_bias(table, p).abs()))
}

pub fn binomial_int(n: usize, k: usize) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// `Σ c_k C(K,k) p^k (1-p)^(K-k)` in exact rational arithmetic.
pub fn expected_value_exact(coeffs: &[BigRational], p: &BigRational) -> BigRational {
    let big_k = coeffs.len() - 1;
    let q = BigRational::one() - p;
    let mut acc = BigRational::zero();
    for (k, c) in coeffs.iter().enumerate() {
        let w = BigRational::from_integer(binomial_int(big_k, k))
            * num_traits::pow(p.clone(), k)
            * num_traits::pow(q.clone(), big_k - k);
        acc += c * w;
    }
    acc
}

pub fn to_rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite value")
}

//! Minimax-bias tables: `min_c max_p |p P_c(p) - p ln p|` over a grid.
//!
//! The LP is posed in shifted-Chebyshev coordinates `P_c(p) = Σ d_j T_j(2p-1)`
//! because the Bernstein coordinates of the optimum grow like `2^K` and make
//! the constraint matrix numerically singular. The Bernstein table is
//! recovered as `c = M d` in exact rational arithmetic. Box rows
//! `|c_k| <= c_max` keep the table representable in `f64`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde_json::json;

use crate::binom::{binomial_int, gradient_weighted_bias, p_log_p, sup_bias, to_rational};
use crate::error::{input, Error, Result};
use crate::grid::{certification_grid, Grid};
use crate::simplex::{solve_inequality_lp, LpProblem, SimplexOptions};
use crate::table::{EstimatorTable, Method};

#[derive(Debug, Clone, Copy)]
pub struct MinimaxOptions {
    /// LP optimality tolerance.
    pub tol: f64,
    /// Bound on `|c_k|`.
    pub c_max: f64,
    /// Re-evaluate the bias on the dense certification grid.
    pub certify: bool,
}

impl Default for MinimaxOptions {
    fn default() -> Self {
        MinimaxOptions { tol: 1e-9, c_max: 1e10, certify: true }
    }
}

#[derive(Debug, Clone)]
pub struct MinimaxSolution {
    /// Normalized (`β = 1`) table.
    pub table: EstimatorTable,
    /// Max weighted bias of the stored table over the solve grid.
    pub epsilon: f64,
    /// LP objective before rounding the table to `f64`.
    pub lp_epsilon: f64,
    /// Max weighted bias on the certification grid, if computed.
    pub certified_epsilon: Option<f64>,
    /// Number of sign runs among grid points within 0.1% of `epsilon`.
    pub alternation: usize,
    pub iterations: usize,
}

impl MinimaxSolution {
    /// `certified ≤ 1.05 × grid ε`.
    pub fn certified(&self) -> bool {
        self.certified_epsilon.map_or(false, |c| c <= 1.05 * self.epsilon)
    }

    /// Whether the grid error equioscillates on at least `K + 2` points.
    pub fn equioscillates(&self) -> bool {
        self.alternation >= self.table.k + 2
    }
}

/// `T_j(2p - 1) = cos(2 j acos(√p))`, `j = 0..=n`.
pub fn shifted_chebyshev(n: usize, p: f64) -> Vec<f64> {
    let theta = 2.0 * p.sqrt().min(1.0).acos();
    (0..=n).map(|j| (j as f64 * theta).cos()).collect()
}

/// Integer numerators `N[k][j]` with `T_j(2p-1) = Σ_k N[k][j] / C(K,k) B_{k,K}(p)`.
fn chebyshev_to_bernstein_numerators(big_k: usize) -> Vec<Vec<BigInt>> {
    let mut n = vec![vec![BigInt::zero(); big_k + 1]; big_k + 1];
    for j in 0..=big_k {
        for (k, row) in n.iter_mut().enumerate() {
            let lo = (j + k).saturating_sub(big_k);
            let hi = j.min(k);
            let mut acc = BigInt::zero();
            for i in lo..=hi {
                let term = binomial_int(2 * j, 2 * i) * binomial_int(big_k - j, k - i);
                if (j - i) % 2 == 0 {
                    acc += term;
                } else {
                    acc -= term;
                }
            }
            row[j] = acc;
        }
    }
    n
}

/// Exact Chebyshev-to-Bernstein change of basis `M[k][j]`.
pub fn chebyshev_to_bernstein_exact(big_k: usize) -> Vec<Vec<BigRational>> {
    let num = chebyshev_to_bernstein_numerators(big_k);
    num.into_iter()
        .enumerate()
        .map(|(k, row)| {
            let den = binomial_int(big_k, k);
            row.into_iter().map(|v| BigRational::new(v, den.clone())).collect()
        })
        .collect()
}

pub fn chebyshev_to_bernstein_f64(big_k: usize) -> Vec<Vec<f64>> {
    chebyshev_to_bernstein_exact(big_k)
        .iter()
        .map(|row| row.iter().map(|v| v.to_f64().expect("finite")).collect())
        .collect()
}

/// `c = M d`, each entry computed exactly and rounded once.
pub fn bernstein_from_chebyshev(m: &[Vec<BigRational>], d: &[f64]) -> Vec<f64> {
    let dr: Vec<BigRational> = d.iter().map(|&x| to_rational(x)).collect();
    m.iter()
        .map(|row| {
            let s = row.iter().zip(&dr).fold(BigRational::zero(), |acc, (a, b)| acc + a * b);
            s.to_f64().expect("finite")
        })
        .collect()
}

/// Grid points below this are left out of the LP: their rows are numerically
/// identical (`≈ [0, …, 0, -1]`) and make the basis singular, while the bias
/// there is below `p (|c_0| + |ln p|)`. Certification still covers them.
pub const LP_MIN_P: f64 = 1e-9;

/// The discretized LP in variables `(d_0..d_K, ε)`.
pub fn build_lp(big_k: usize, grid: &Grid, m_f64: &[Vec<f64>], c_max: f64) -> LpProblem {
    let n = big_k + 2;
    let mut rows = Vec::with_capacity(2 * grid.len() + 2 * (big_k + 1));
    let mut rhs = Vec::with_capacity(rows.capacity());
    for p in grid.positive().filter(|&p| p >= LP_MIN_P) {
        let t = shifted_chebyshev(big_k, p);
        let target = p_log_p(p);
        let mut up: Vec<f64> = t.iter().map(|v| p * v).collect();
        up.push(-1.0);
        let mut dn: Vec<f64> = t.iter().map(|v| -p * v).collect();
        dn.push(-1.0);
        rows.push(up);
        rhs.push(target);
        rows.push(dn);
        rhs.push(-target);
    }
    for mk in m_f64 {
        let scale = mk.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let mut up: Vec<f64> = mk.iter().map(|v| v / scale).collect();
        up.push(0.0);
        let dn: Vec<f64> = up.iter().map(|v| -v).collect();
        rows.push(up);
        rhs.push(c_max / scale);
        rows.push(dn);
        rhs.push(c_max / scale);
    }
    let mut cost = vec![0.0; n];
    cost[n - 1] = 1.0;
    LpProblem { rows, rhs, cost }
}

fn alternation_runs(table: &EstimatorTable, grid: &Grid, eps: f64) -> usize {
    let mut runs = 0;
    let mut last = 0.0f64;
    for p in grid.positive() {
        let e = gradient_weighted_bias(table, p);
        if e.abs() >= 0.999 * eps {
            let s = e.signum();
            if s != last {
                runs += 1;
                last = s;
            }
        }
    }
    runs
}

pub fn solve_minimax(big_k: usize, grid: &Grid, opts: &MinimaxOptions) -> Result<MinimaxSolution> {
    if big_k == 0 {
        return input("K must be positive");
    }
    if grid.points.first() != Some(&0.0) || grid.points.last() != Some(&1.0) {
        return input("grid must cover [0, 1]");
    }
    let m_exact = chebyshev_to_bernstein_exact(big_k);
    let m_f64: Vec<Vec<f64>> =
        m_exact.iter().map(|r| r.iter().map(|v| v.to_f64().expect("finite")).collect()).collect();
    let lp = build_lp(big_k, grid, &m_f64, opts.c_max);
    let sopts = SimplexOptions { tol: opts.tol, ..Default::default() };
    let sol = solve_inequality_lp(&lp, &sopts).map_err(|e| match e {
        Error::Infeasible(msg) => Error::Solver(format!("assembly bug, LP reported infeasible: {msg}")),
        other => other,
    })?;
    let d = &sol.x[..=big_k];
    let coeffs = bernstein_from_chebyshev(&m_exact, d);
    let mut table = EstimatorTable::new(big_k, 1.0, Method::Minimax, coeffs)?;
    let epsilon = sup_bias(&table, grid);
    if !(epsilon <= 1.01 * sol.objective + 1e-12) {
        return Err(Error::Solver(format!(
            "rounded table misses the LP optimum (grid ε {epsilon:e}, LP ε {:e}): the coefficient box \
             cannot be enforced in f64 at K = {big_k}",
            sol.objective
        )));
    }
    let certified_epsilon = if opts.certify {
        Some(sup_bias(&table, &certification_grid(big_k, grid.len())))
    } else {
        None
    };
    let alternation = alternation_runs(&table, grid, epsilon);
    table.meta.insert("epsilon".into(), json!(epsilon));
    table.meta.insert("grid_epsilon".into(), json!(epsilon));
    table.meta.insert("lp_epsilon".into(), json!(sol.objective));
    if let Some(c) = certified_epsilon {
        table.meta.insert("certified_epsilon".into(), json!(c));
    }
    table.meta.insert("grid".into(), json!(grid.len()));
    table.meta.insert("grid_scheme".into(), json!(grid.scheme.as_str()));
    table.meta.insert("c_max".into(), json!(opts.c_max));
    table.meta.insert("alternation_points".into(), json!(alternation));
    table.meta.insert("simplex_iterations".into(), json!(sol.iterations));
    Ok(MinimaxSolution {
        table,
        epsilon,
        lp_epsilon: sol.objective,
        certified_epsilon,
        alternation,
        iterations: sol.iterations,
    })
}

#[derive(Debug, Clone)]
pub struct ScalingRow {
    pub k: usize,
    pub epsilon: f64,
    pub ratio_to_prev: Option<f64>,
    /// Continuum minimax error from the exchange oracle.
    pub continuum_epsilon: Option<f64>,
    pub solution: MinimaxSolution,
}

/// `ε*(K)` for each `K` with consecutive ratios.
pub fn scaling_study(ks: &[usize], m: usize, opts: &MinimaxOptions) -> Result<Vec<ScalingRow>> {
    if ks.windows(2).any(|w| w[0] >= w[1]) {
        return input("Ks must be strictly increasing");
    }
    let mut out: Vec<ScalingRow> = Vec::with_capacity(ks.len());
    for &k in ks {
        let grid = crate::grid::build_grid(k, m, crate::grid::Scheme::BoundaryRefined)?;
        let solution = solve_minimax(k, &grid, opts)?;
        let ratio_to_prev = out.last().map(|r| solution.epsilon / r.epsilon);
        let continuum_epsilon = crate::remez::remez_minimax(k, 100).ok().map(|r| r.epsilon);
        out.push(ScalingRow { k, epsilon: solution.epsilon, ratio_to_prev, continuum_epsilon, solution });
    }
    Ok(out)
}

//! Variance-optimal tables under a bias budget.
//!
//! For a budget `ε ≥ ε*(K)` the program
//!
//! ```text
//! minimize v  subject to  |p P_c(p) - p ln p| <= ε   (bias grid)
//!                         Σ_k c_k^2 B_{k,K}(p) <= v  (second-moment grid)
//! ```
//!
//! is convex in `(c, v)`. It is solved by a log-barrier Newton method started
//! from the minimax table, which is strictly feasible for every admissible
//! budget. A projected-subgradient method on the same program serves as an
//! independent check.

use serde_json::json;

use crate::binom::{bernstein_row, p_log_p, second_moment, sup_bias};
use crate::error::{input, Error, Result};
use crate::estimators::{plugin_log_table, taylor_bt_table};
use crate::grid::{build_grid, certification_grid, Grid, Scheme};
use crate::linalg::{Lu, Matrix};
use crate::minimax::{solve_minimax, MinimaxOptions, MinimaxSolution};
use crate::table::{EstimatorTable, Method};

/// Relative slack added to the budget so that it has a nonempty interior.
pub const BUDGET_SLACK: f64 = 1e-6;

/// Size of the second-moment grid.
pub const S_GRID_M: usize = 1024;

#[derive(Debug, Clone, Copy)]
pub struct AqpOptions {
    /// Relative duality-gap tolerance of the barrier method.
    pub tol: f64,
    pub max_newton: usize,
    pub certify: bool,
}

impl Default for AqpOptions {
    fn default() -> Self {
        AqpOptions { tol: 1e-8, max_newton: 1000, certify: true }
    }
}

#[derive(Debug, Clone)]
pub struct ParetoPoint {
    pub epsilon: f64,
    /// `max_p S(c, p)` over the second-moment grid.
    pub v: f64,
    pub table: EstimatorTable,
    /// Max weighted bias on the dense certification grid.
    pub certified_epsilon: Option<f64>,
    /// Max second moment on the dense certification grid.
    pub certified_v: Option<f64>,
    pub newton_iterations: usize,
}

impl ParetoPoint {
    /// Dense-grid bias within 5% of the budget.
    pub fn certified(&self) -> bool {
        self.certified_epsilon.map_or(false, |c| c <= 1.05 * self.epsilon)
    }
}

/// Reusable solver for one group size: the constraint rows and the minimax
/// solution are computed once.
pub struct AqpSolver {
    pub k: usize,
    pub grid: Grid,
    pub s_grid: Grid,
    pub minimax: MinimaxSolution,
    bias_rows: Vec<(Vec<f64>, f64)>,
    s_rows: Vec<Vec<f64>>,
    opts: AqpOptions,
}

impl AqpSolver {
    pub fn new(k: usize, grid: Grid, opts: AqpOptions) -> Result<Self> {
        let minimax = solve_minimax(k, &grid, &MinimaxOptions { certify: false, ..Default::default() })?;
        Self::with_minimax(k, grid, minimax, opts)
    }

    pub fn with_minimax(k: usize, grid: Grid, minimax: MinimaxSolution, opts: AqpOptions) -> Result<Self> {
        if minimax.table.k != k {
            return input(format!("minimax table has K = {}, expected {k}", minimax.table.k));
        }
        let s_grid = build_grid(k, S_GRID_M, Scheme::Chebyshev)?;
        let bias_rows = grid
            .positive()
            .map(|p| (bernstein_row(k, p).into_iter().map(|b| p * b).collect(), p_log_p(p)))
            .collect();
        let s_rows = s_grid.points.iter().map(|&p| bernstein_row(k, p)).collect();
        Ok(AqpSolver { k, grid, s_grid, minimax, bias_rows, s_rows, opts })
    }

    /// `ε*(K)` on the solve grid.
    pub fn epsilon_star(&self) -> f64 {
        self.minimax.epsilon
    }

    fn max_s(&self, c: &[f64]) -> f64 {
        self.s_rows.iter().map(|b| dot_sq(b, c)).fold(f64::NEG_INFINITY, f64::max)
    }

    fn max_bias(&self, c: &[f64]) -> f64 {
        self.bias_rows.iter().map(|(a, g)| (dot(a, c) - g).abs()).fold(0.0, f64::max)
    }

    pub fn solve(&self, epsilon: f64) -> Result<ParetoPoint> {
        self.solve_from(epsilon, &self.minimax.table.coeffs)
    }

    /// Solves starting from `start`, which must satisfy the budget strictly.
    pub fn solve_from(&self, epsilon: f64, start: &[f64]) -> Result<ParetoPoint> {
        let eps_star = self.epsilon_star();
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return input(format!("bias budget must be positive, got {epsilon}"));
        }
        if epsilon < eps_star {
            return Err(Error::Infeasible(format!(
                "bias budget {epsilon:e} is below the minimax bias {eps_star:e}; the minimax table \
                 already violates it at p = {:e} and no table does better",
                crate::binom::bias_profile(&self.minimax.table, &self.grid).argmax_bias()
            )));
        }
        let eps = epsilon * (1.0 + BUDGET_SLACK);
        let (c, iters) = self.interior_point(eps, start)?;
        let v = self.max_s(&c);
        let mut table = EstimatorTable::new(self.k, 1.0, Method::Aqp, c)?;
        let (certified_epsilon, certified_v) = if self.opts.certify {
            let dense = certification_grid(self.k, self.grid.len());
            let cv = dense.points.iter().map(|&p| second_moment(&table, p)).fold(f64::NEG_INFINITY, f64::max);
            (Some(sup_bias(&table, &dense)), Some(cv))
        } else {
            (None, None)
        };
        table.meta.insert("epsilon".into(), json!(epsilon));
        table.meta.insert("epsilon_star".into(), json!(eps_star));
        table.meta.insert("v".into(), json!(v));
        table.meta.insert("grid".into(), json!(self.grid.len()));
        table.meta.insert("s_grid".into(), json!(self.s_grid.len()));
        if let Some(c) = certified_epsilon {
            table.meta.insert("certified_epsilon".into(), json!(c));
        }
        if let Some(c) = certified_v {
            table.meta.insert("certified_v".into(), json!(c));
        }
        Ok(ParetoPoint { epsilon, v, table, certified_epsilon, certified_v, newton_iterations: iters })
    }

    /// Constraint values `f_i(x) <= 0`: two per bias row, then one per
    /// second-moment row.
    fn constraints(&self, x: &[f64], eps: f64) -> Vec<f64> {
        let n = self.k + 1;
        let (c, v) = (&x[..n], x[n]);
        let mut f = Vec::with_capacity(2 * self.bias_rows.len() + self.s_rows.len());
        for (a, g) in &self.bias_rows {
            let r = dot(a, c) - g;
            f.push(r - eps);
            f.push(-r - eps);
        }
        for b in &self.s_rows {
            f.push(dot_sq(b, c) - v);
        }
        f
    }

    /// Gradient of constraint `i` at `x`, written into `out`.
    fn constraint_grad(&self, i: usize, x: &[f64], out: &mut [f64]) {
        let n = self.k + 1;
        let nb = 2 * self.bias_rows.len();
        if i < nb {
            let a = &self.bias_rows[i / 2].0;
            let sgn = if i % 2 == 0 { 1.0 } else { -1.0 };
            for j in 0..n {
                out[j] = sgn * a[j];
            }
            out[n] = 0.0;
        } else {
            let b = &self.s_rows[i - nb];
            for j in 0..n {
                out[j] = 2.0 * b[j] * x[j];
            }
            out[n] = -1.0;
        }
    }

    /// Primal-dual interior-point method on `min v` over the constraints.
    fn interior_point(&self, eps: f64, start: &[f64]) -> Result<(Vec<f64>, usize)> {
        const MU: f64 = 2.0;
        let n = self.k + 1;
        let nb = 2 * self.bias_rows.len();
        if start.len() != n {
            return input(format!("start table has {} entries, expected {n}", start.len()));
        }
        let mut x = start.to_vec();
        let s0 = self.max_s(&x);
        x.push(s0 * (1.0 + 1e-2) + 1e-6);
        let mut f = self.constraints(&x, eps);
        if f.iter().any(|&v| v >= 0.0) {
            return Err(Error::Solver("starting table is not strictly feasible for the budget".into()));
        }
        let m = f.len();
        let t0 = m as f64 / x[n];
        let mut lam: Vec<f64> = f.iter().map(|fi| 1.0 / (t0 * -fi)).collect();
        let mut g = vec![0.0; n + 1];
        let residual = |x: &[f64], f: &[f64], lam: &[f64], t: f64, g: &mut [f64]| -> (Vec<f64>, f64, f64) {
            let mut rd = vec![0.0; n + 1];
            rd[n] = 1.0;
            let mut scale = 1.0f64;
            let mut rc = 0.0;
            for i in 0..f.len() {
                self.constraint_grad(i, x, g);
                let gmax = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                scale = scale.max(lam[i] * gmax);
                for j in 0..=n {
                    rd[j] += lam[i] * g[j];
                }
                let c = -lam[i] * f[i] - 1.0 / t;
                rc += c * c;
            }
            (rd, scale, rc)
        };
        for it in 0..self.opts.max_newton {
            let eta: f64 = -f.iter().zip(&lam).map(|(a, b)| a * b).sum::<f64>();
            let t = MU * m as f64 / eta;
            let (rd, scale, rc) = residual(&x, &f, &lam, t, &mut g);
            let rd_norm = rd.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if eta <= self.opts.tol * x[n] + 1e-14 && rd_norm <= 1e-9 * scale {
                x.truncate(n);
                return Ok((x, it));
            }

            let mut h = Matrix::zeros(n + 1);
            let mut rhs = vec![0.0; n + 1];
            rhs[n] = -1.0;
            for i in 0..m {
                self.constraint_grad(i, &x, &mut g);
                let w = lam[i] / -f[i];
                let inv = 1.0 / (t * -f[i]);
                for j in 0..=n {
                    rhs[j] -= inv * g[j];
                    let gj = w * g[j];
                    for l in 0..=j {
                        h.add(j, l, gj * g[l]);
                    }
                }
                if i >= nb {
                    let b = &self.s_rows[i - nb];
                    for j in 0..n {
                        h.add(j, j, 2.0 * lam[i] * b[j]);
                    }
                }
            }
            for j in 0..=n {
                for l in 0..j {
                    let v = h.get(j, l);
                    h.set(l, j, v);
                }
            }
            let dx = newton_direction(&h, &rhs)?;
            let mut dlam = vec![0.0; m];
            for i in 0..m {
                self.constraint_grad(i, &x, &mut g);
                let gdx: f64 = g.iter().zip(&dx).map(|(a, b)| a * b).sum();
                dlam[i] = lam[i] / -f[i] * gdx - lam[i] + 1.0 / (t * -f[i]);
            }
            let mut s = 1.0f64;
            for i in 0..m {
                if dlam[i] < 0.0 {
                    s = s.min(-lam[i] / dlam[i]);
                }
            }
            s *= 0.99;
            let r0 = (rd.iter().map(|v| v * v).sum::<f64>() + rc).sqrt();
            let mut accepted = false;
            for _ in 0..60 {
                let xn: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + s * b).collect();
                let fnew = self.constraints(&xn, eps);
                if fnew.iter().all(|&v| v < 0.0) {
                    let ln: Vec<f64> = lam.iter().zip(&dlam).map(|(a, b)| a + s * b).collect();
                    let (rdn, _, rcn) = residual(&xn, &fnew, &ln, t, &mut g);
                    let r1 = (rdn.iter().map(|v| v * v).sum::<f64>() + rcn).sqrt();
                    if r1 <= (1.0 - 0.01 * s) * r0 {
                        x = xn;
                        f = fnew;
                        lam = ln;
                        accepted = true;
                        break;
                    }
                }
                s *= 0.5;
            }
            if !accepted {
                // Rounding limits progress once the gap is this small.
                if eta <= 1e-6 * x[n] + 1e-12 {
                    x.truncate(n);
                    return Ok((x, it));
                }
                return Err(Error::Solver(format!(
                    "interior point stalled at iteration {it}: dual residual {rd_norm:e} (scale {scale:e}), \
                     surrogate gap {eta:e}"
                )));
            }
        }
        Err(Error::Solver(format!("interior point did not converge in {} iterations", self.opts.max_newton)))
    }

    /// Solves at each budget in turn, warm-starting from the previous point.
    pub fn pareto_trace(&self, epsilons: &[f64]) -> Result<Vec<ParetoPoint>> {
        if epsilons.windows(2).any(|w| !(w[0] < w[1])) {
            return input("bias budgets must be strictly increasing");
        }
        let mut out: Vec<ParetoPoint> = Vec::with_capacity(epsilons.len());
        for &e in epsilons {
            let pt = match out.last() {
                Some(prev) => self.solve_from(e, &prev.table.coeffs)?,
                None => self.solve(e)?,
            };
            out.push(pt);
        }
        Ok(out)
    }

    /// Projected-subgradient method on the same program: steps along a
    /// subgradient of the worst bias violation while infeasible and of
    /// `max_p S` otherwise, keeping the best feasible iterate.
    pub fn subgradient(&self, epsilon: f64, iters: usize) -> Result<(Vec<f64>, f64)> {
        let eps = epsilon * (1.0 + BUDGET_SLACK);
        let mut c = self.minimax.table.coeffs.clone();
        let mut best = (c.clone(), self.max_s(&c));
        if self.max_bias(&c) > eps {
            return Err(Error::Infeasible("starting table violates the budget".into()));
        }
        let scale = c.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        for it in 1..=iters {
            let (mut worst, mut wi, mut sign) = (0.0, 0, 0.0);
            for (i, (a, g)) in self.bias_rows.iter().enumerate() {
                let r = dot(a, &c) - g;
                if r.abs() > worst {
                    worst = r.abs();
                    wi = i;
                    sign = r.signum();
                }
            }
            let dir: Vec<f64> = if worst > eps {
                self.bias_rows[wi].0.iter().map(|a| sign * a).collect()
            } else {
                let v = self.max_s(&c);
                if v < best.1 {
                    best = (c.clone(), v);
                }
                let (j, _) = self
                    .s_rows
                    .iter()
                    .enumerate()
                    .map(|(j, b)| (j, dot_sq(b, &c)))
                    .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
                self.s_rows[j].iter().zip(&c).map(|(b, x)| 2.0 * b * x).collect()
            };
            let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
            if norm == 0.0 {
                break;
            }
            let step = if worst > eps { (worst - eps) / (norm * norm) } else { scale / (norm * (it as f64).sqrt()) };
            for (x, d) in c.iter_mut().zip(&dir) {
                *x -= step * d;
            }
        }
        Ok(best)
    }

    /// Compares a frontier point with the closed-form tables.
    pub fn dominance_check(&self, point: &ParetoPoint, c0: f64, z_size: usize) -> Result<DominanceReport> {
        let k = self.k;
        let mut competitors = vec![("zero".to_string(), EstimatorTable::new(k, 1.0, Method::UStatistic, vec![0.0; k + 1])?)];
        competitors.push(("taylor_bt".to_string(), taylor_bt_table(k, 1.0, c0)?));
        for alpha in [0.25, 0.5, 1.0] {
            competitors.push((format!("plugin_log(alpha={alpha})"), plugin_log_table(k, 1.0, alpha, z_size, false)?));
        }
        let max_c_sq = point.table.coeffs.iter().fold(0.0f64, |m, c| m.max(c * c));
        let rows = competitors
            .into_iter()
            .map(|(name, t)| {
                let bias = sup_bias(&t, &self.grid);
                let v = self.max_s(&t.coeffs);
                let comparable = bias <= point.epsilon * (1.0 + BUDGET_SLACK);
                let dominated = comparable.then(|| point.v <= v * (1.0 + 1e-6) + 1e-9);
                Competitor { name, sup_bias: bias, v, dominated }
            })
            .collect();
        Ok(DominanceReport { epsilon: point.epsilon, v: point.v, max_c_sq, boundary_ok: point.v <= max_c_sq + 1e-9, competitors: rows })
    }
}

#[derive(Debug, Clone)]
pub struct Competitor {
    pub name: String,
    pub sup_bias: f64,
    pub v: f64,
    /// `None` when the table does not fit the bias budget.
    pub dominated: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct DominanceReport {
    pub epsilon: f64,
    pub v: f64,
    pub max_c_sq: f64,
    /// `max_p S(c*, p) <= max_k c_k^2`.
    pub boundary_ok: bool,
    pub competitors: Vec<Competitor>,
}

impl DominanceReport {
    /// No comparable closed form has a smaller worst-case second moment.
    pub fn holds(&self) -> bool {
        self.boundary_ok && self.competitors.iter().all(|c| c.dominated != Some(false))
    }
}

/// One-shot solve on a given grid.
pub fn solve_aqp(k: usize, grid: &Grid, epsilon: f64, opts: AqpOptions) -> Result<ParetoPoint> {
    AqpSolver::new(k, grid.clone(), opts)?.solve(epsilon)
}

/// `ε*·2^j` for `j = 0..n`.
pub fn geometric_budgets(eps_star: f64, n: usize) -> Vec<f64> {
    (0..n).map(|j| eps_star * 2f64.powi(j as i32)).collect()
}

/// Solves `H dx = r` after symmetric diagonal equilibration of `H`.
fn newton_direction(h: &Matrix, r: &[f64]) -> Result<Vec<f64>> {
    let n = r.len();
    let d: Vec<f64> = (0..n).map(|i| 1.0 / h.get(i, i).abs().sqrt().max(1e-300)).collect();
    let mut hs = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            hs.set(i, j, d[i] * h.get(i, j) * d[j]);
        }
    }
    let rhs: Vec<f64> = (0..n).map(|i| d[i] * r[i]).collect();
    let y = Lu::factor(&hs)?.solve(&rhs);
    Ok(y.iter().zip(&d).map(|(a, b)| a * b).collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dot_sq(b: &[f64], c: &[f64]) -> f64 {
    b.iter().zip(c).map(|(x, y)| x * y * y).sum()
}

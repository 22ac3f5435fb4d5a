//! Dense revised simplex for inequality LPs with few variables.
//!
//! `min c^T x  s.t.  A x <= b` with `x` free is solved through its dual
//! `min b^T w  s.t.  A^T w = -c, w >= 0`, which has one equality row per
//! primal variable. The primal solution is read off as the simplex
//! multipliers of the optimal dual basis.

use crate::error::{Error, Result};
use crate::linalg::{Lu, Matrix};

#[derive(Debug, Clone)]
pub struct LpProblem {
    /// Rows of `A`, each of length `n`.
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
    pub cost: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    /// Reduced-cost optimality tolerance.
    pub tol: f64,
    pub max_iter: usize,
    /// Non-improving iterations before switching to Bland's rule.
    pub stall_limit: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions { tol: 1e-9, max_iter: 200_000, stall_limit: 50 }
    }
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Indices of the primal rows in the optimal basis (tight constraints).
    pub active: Vec<usize>,
    pub iterations: usize,
    pub bland_iterations: usize,
}

struct Tableau<'a> {
    p: &'a LpProblem,
    n: usize,
    m: usize,
    sigma: Vec<f64>,
    h: Vec<f64>,
    basic: Vec<usize>,
    is_basic: Vec<bool>,
}

impl<'a> Tableau<'a> {
    fn column(&self, j: usize) -> Vec<f64> {
        if j < self.m {
            (0..self.n).map(|i| self.sigma[i] * self.p.rows[j][i]).collect()
        } else {
            let mut e = vec![0.0; self.n];
            e[j - self.m] = 1.0;
            e
        }
    }

    fn basis_lu(&self) -> Result<Lu> {
        let mut b = Matrix::zeros(self.n);
        for (k, &j) in self.basic.iter().enumerate() {
            if j < self.m {
                for i in 0..self.n {
                    b.set(i, k, self.sigma[i] * self.p.rows[j][i]);
                }
            } else {
                b.set(j - self.m, k, 1.0);
            }
        }
        Lu::factor(&b)
    }

    fn is_artificial(&self, j: usize) -> bool {
        j >= self.m
    }

    fn pivot(&mut self, r: usize, q: usize) {
        self.is_basic[self.basic[r]] = false;
        self.basic[r] = q;
        self.is_basic[q] = true;
    }

    /// Runs simplex iterations for the given cost on real columns
    /// (`phase1` puts unit cost on artificials and zero on real columns).
    fn run(&mut self, phase1: bool, opts: &SimplexOptions, iters: &mut usize, bland_iters: &mut usize) -> Result<()> {
        let cost = |t: &Tableau, j: usize| -> f64 {
            if phase1 {
                if t.is_artificial(j) {
                    1.0
                } else {
                    0.0
                }
            } else if t.is_artificial(j) {
                0.0
            } else {
                t.p.rhs[j]
            }
        };
        let mut best_obj = f64::INFINITY;
        let mut stall = 0usize;
        let mut bland = false;
        // Columns whose last pivot left a numerically singular basis; they sit
        // out until the next successful pivot.
        let mut banned = vec![false; self.m];
        let mut last: Option<(usize, usize, usize)> = None;
        loop {
            if *iters >= opts.max_iter {
                return Err(Error::Solver(format!("simplex iteration cap {} reached", opts.max_iter)));
            }
            let lu = match self.basis_lu() {
                Ok(lu) => {
                    if last.take().is_some() {
                        banned.iter_mut().for_each(|b| *b = false);
                    }
                    lu
                }
                Err(e) => match last.take() {
                    Some((r, q, old)) => {
                        self.pivot(r, old);
                        banned[q] = true;
                        continue;
                    }
                    None => return Err(e),
                },
            };
            let xb = lu.solve(&self.h);
            let cb: Vec<f64> = self.basic.iter().map(|&j| cost(self, j)).collect();
            let obj: f64 = cb.iter().zip(&xb).map(|(c, x)| c * x).sum();
            if obj < best_obj - 1e-14 * (1.0 + obj.abs()) {
                best_obj = obj;
                stall = 0;
                bland = false;
            } else {
                stall += 1;
                if stall >= opts.stall_limit {
                    bland = true;
                }
            }
            let y = lu.solve_transpose(&cb);
            let ys: Vec<f64> = (0..self.n).map(|i| self.sigma[i] * y[i]).collect();

            // Pricing over real columns; artificials never re-enter.
            let mut enter: Option<(usize, f64)> = None;
            for j in 0..self.m {
                if self.is_basic[j] || banned[j] {
                    continue;
                }
                let row = &self.p.rows[j];
                let mut dot = 0.0;
                for i in 0..self.n {
                    dot += row[i] * ys[i];
                }
                let d = cost(self, j) - dot;
                if d < -opts.tol {
                    match enter {
                        None => enter = Some((j, d)),
                        Some((_, best)) if !bland && d < best => enter = Some((j, d)),
                        _ => {}
                    }
                    if bland {
                        break;
                    }
                }
            }
            let Some((q, _)) = enter else {
                return Ok(());
            };
            let dir = lu.solve(&self.column(q));
            let dmax = dir.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let piv_tol = 1e-11 * dmax.max(1.0);
            let leave = if bland {
                self.ratio_bland(&xb, &dir, piv_tol)
            } else {
                self.ratio_harris(&xb, &dir, piv_tol)
            };
            let Some((r, _)) = leave else {
                return Err(Error::Infeasible(
                    "dual LP is unbounded: the primal constraints are inconsistent".into(),
                ));
            };
            last = Some((r, q, self.basic[r]));
            self.pivot(r, q);
            *iters += 1;
            if bland {
                *bland_iters += 1;
            }
        }
    }

    /// Minimum ratio, ties broken towards artificials then the smallest
    /// variable index.
    fn ratio_bland(&self, xb: &[f64], dir: &[f64], piv_tol: f64) -> Option<(usize, f64)> {
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..self.n {
            if dir[i] <= piv_tol {
                continue;
            }
            let theta = xb[i].max(0.0) / dir[i];
            let better = match leave {
                None => true,
                Some((r, best)) => {
                    let tie = (theta - best).abs() <= 1e-12 * (1.0 + best.abs());
                    if tie {
                        let (ai, ar) = (self.is_artificial(self.basic[i]), self.is_artificial(self.basic[r]));
                        if ai != ar {
                            ai
                        } else {
                            self.basic[i] < self.basic[r]
                        }
                    } else {
                        theta < best
                    }
                }
            };
            if better {
                leave = Some((i, theta));
            }
        }
        leave
    }

    /// Harris two-pass ratio test: among rows whose ratio is within the
    /// relaxed bound, take the largest pivot.
    fn ratio_harris(&self, xb: &[f64], dir: &[f64], piv_tol: f64) -> Option<(usize, f64)> {
        const DELTA: f64 = 1e-9;
        let mut bound = f64::INFINITY;
        for i in 0..self.n {
            if dir[i] > piv_tol {
                bound = bound.min((xb[i].max(0.0) + DELTA) / dir[i]);
            }
        }
        if !bound.is_finite() {
            return None;
        }
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..self.n {
            if dir[i] <= piv_tol {
                continue;
            }
            let theta = xb[i].max(0.0) / dir[i];
            if theta > bound {
                continue;
            }
            let better = match leave {
                None => true,
                Some((r, _)) => {
                    let (ai, ar) = (self.is_artificial(self.basic[i]), self.is_artificial(self.basic[r]));
                    if ai != ar {
                        ai
                    } else {
                        dir[i] > dir[r]
                    }
                }
            };
            if better {
                leave = Some((i, theta));
            }
        }
        leave
    }

    fn drive_out_artificials(&mut self) -> Result<()> {
        for r in 0..self.n {
            if !self.is_artificial(self.basic[r]) {
                continue;
            }
            let lu = self.basis_lu()?;
            let mut e = vec![0.0; self.n];
            e[r] = 1.0;
            let row = lu.solve_transpose(&e);
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.m {
                if self.is_basic[j] {
                    continue;
                }
                let v: f64 = self.column(j).iter().zip(&row).map(|(a, b)| a * b).sum();
                if v.abs() > 1e-9 && best.map_or(true, |(_, b)| v.abs() > b) {
                    best = Some((j, v.abs()));
                }
            }
            match best {
                Some((j, _)) => self.pivot(r, j),
                None => return Err(Error::Solver("redundant equality row in dual LP".into())),
            }
        }
        Ok(())
    }
}

pub fn solve_inequality_lp(p: &LpProblem, opts: &SimplexOptions) -> Result<LpSolution> {
    let n = p.cost.len();
    let m = p.rows.len();
    if p.rhs.len() != m {
        return Err(Error::Input("rhs length differs from row count".into()));
    }
    if let Some(i) = p.rows.iter().position(|r| r.len() != n) {
        return Err(Error::Input(format!("row {i} has the wrong length")));
    }
    let sigma: Vec<f64> = p.cost.iter().map(|&c| if -c >= 0.0 { 1.0 } else { -1.0 }).collect();
    let h: Vec<f64> = p.cost.iter().zip(&sigma).map(|(&c, &s)| -c * s).collect();
    let mut is_basic = vec![false; m + n];
    let basic: Vec<usize> = (m..m + n).collect();
    for &j in &basic {
        is_basic[j] = true;
    }
    let mut t = Tableau { p, n, m, sigma, h, basic, is_basic };
    let mut iters = 0;
    let mut bland = 0;

    t.run(true, opts, &mut iters, &mut bland)?;
    let lu = t.basis_lu()?;
    let xb = lu.solve(&t.h);
    let infeas: f64 = t.basic.iter().zip(&xb).filter(|(&j, _)| j >= m).map(|(_, x)| x.max(0.0)).sum();
    if infeas > 1e-7 * (1.0 + t.h.iter().map(|v| v.abs()).sum::<f64>()) {
        return Err(Error::Solver(format!("primal LP is unbounded (dual phase 1 residual {infeas:e})")));
    }
    t.drive_out_artificials()?;
    t.run(false, opts, &mut iters, &mut bland)?;

    let lu = t.basis_lu()?;
    let rhs_b: Vec<f64> = t.basic.iter().map(|&j| p.rhs[j]).collect();
    let y = lu.solve_transpose(&rhs_b);
    let x: Vec<f64> = (0..n).map(|i| t.sigma[i] * y[i]).collect();
    let objective = p.cost.iter().zip(&x).map(|(c, v)| c * v).sum();
    let mut active = t.basic.clone();
    active.sort_unstable();
    Ok(LpSolution { x, objective, active, iterations: iters, bland_iterations: bland })
}

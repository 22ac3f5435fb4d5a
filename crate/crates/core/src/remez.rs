//! Exchange-method oracle for the weighted minimax problem.
//!
//! Approximates `f(p) = p ln p` on `(0, 1]` by `Σ_j d_j p T_j(2p-1)`, `j ≤ K`,
//! with the classical Remez iteration: solve the levelled equations on a
//! reference of `K + 2` points, then move the reference to the alternating
//! extrema of the error. The weighted system is a Haar system on `(0, 1]`.
//! It shares no code with the LP path and serves as its cross-check.

use crate::binom::p_log_p;
use crate::error::{Error, Result};
use crate::linalg::{Lu, Matrix};
use crate::minimax::shifted_chebyshev;

#[derive(Debug, Clone)]
pub struct RemezResult {
    /// Continuum minimax error.
    pub epsilon: f64,
    /// Levelled error on the final reference.
    pub level: f64,
    pub reference: Vec<f64>,
    /// Chebyshev coordinates `d_j`.
    pub cheb: Vec<f64>,
    pub iterations: usize,
}

impl RemezResult {
    /// `P(0) = Σ (-1)^j d_j`, which is also the Bernstein coefficient `c_0`.
    pub fn c0(&self) -> f64 {
        self.cheb.iter().enumerate().map(|(j, d)| if j % 2 == 0 { *d } else { -d }).sum()
    }
}

fn approx(d: &[f64], p: f64) -> f64 {
    let t = shifted_chebyshev(d.len() - 1, p);
    p * d.iter().zip(&t).map(|(a, b)| a * b).sum::<f64>()
}

fn err(d: &[f64], p: f64) -> f64 {
    approx(d, p) - p_log_p(p)
}

fn search_grid(k: usize, n: usize) -> Vec<f64> {
    let mut g: Vec<f64> = (1..n)
        .map(|i| {
            let s = (std::f64::consts::FRAC_PI_2 * i as f64 / (n - 1) as f64).sin();
            s * s
        })
        .collect();
    for j in 0..60 {
        g.push(2f64.powi(-j) / k as f64);
    }
    g.retain(|&p| p > 0.0 && p <= 1.0);
    g.sort_by(|a, b| a.partial_cmp(b).unwrap());
    g.dedup();
    g
}

/// Golden-section refinement of a local extremum of `|err|` in `[a, b]`.
fn refine(d: &[f64], a: f64, b: f64) -> f64 {
    let gr = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (a, b);
    let f = |p: f64| err(d, p).abs();
    let mut c = b - gr * (b - a);
    let mut e = a + gr * (b - a);
    let (mut fc, mut fe) = (f(c), f(e));
    for _ in 0..80 {
        if fc > fe {
            b = e;
            e = c;
            fe = fc;
            c = b - gr * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + gr * (b - a);
            fe = f(e);
        }
        if (b - a) <= 1e-15 * b.max(1e-300) {
            break;
        }
    }
    0.5 * (a + b)
}

pub fn remez_minimax(big_k: usize, max_iter: usize) -> Result<RemezResult> {
    let n = big_k + 1;
    let npts = n + 1;
    let grid = search_grid(big_k, 20_000 + 400 * big_k);
    // Initial reference clustered quadratically towards the boundary layer.
    let mut reference: Vec<f64> = (0..npts)
        .map(|i| {
            let s = (std::f64::consts::FRAC_PI_2 * (i as f64 + 0.5) / npts as f64).sin();
            (s * s).max(1e-6 / big_k as f64)
        })
        .collect();
    *reference.last_mut().unwrap() = 1.0;
    let mut d = vec![0.0; n];
    let mut level = 0.0;
    for it in 0..max_iter {
        let mut a = Matrix::zeros(npts);
        let mut rhs = vec![0.0; npts];
        for (i, &p) in reference.iter().enumerate() {
            let t = shifted_chebyshev(big_k, p);
            for j in 0..n {
                a.set(i, j, p * t[j]);
            }
            a.set(i, n, if i % 2 == 0 { 1.0 } else { -1.0 });
            rhs[i] = p_log_p(p);
        }
        let sol = Lu::factor(&a)?.solve(&rhs);
        d.copy_from_slice(&sol[..n]);
        level = sol[n].abs();

        // Alternating extrema of the error on the search grid.
        let e: Vec<f64> = grid.iter().map(|&p| err(&d, p)).collect();
        let mut ext: Vec<(f64, f64)> = Vec::new();
        let mut i = 0;
        while i < grid.len() {
            let s = e[i].signum();
            let mut best = i;
            let mut j = i;
            while j < grid.len() && e[j].signum() == s {
                if e[j].abs() > e[best].abs() {
                    best = j;
                }
                j += 1;
            }
            let lo = if best > 0 { grid[best - 1] } else { grid[best] * 0.5 };
            let hi = if best + 1 < grid.len() { grid[best + 1] } else { 1.0 };
            let p = if best + 1 == grid.len() { 1.0 } else { refine(&d, lo, hi) };
            ext.push((p, err(&d, p)));
            i = j;
        }
        while ext.len() > npts {
            if ext[0].1.abs() < ext[ext.len() - 1].1.abs() {
                ext.remove(0);
            } else {
                ext.pop();
            }
        }
        let emax = ext.iter().fold(0.0f64, |m, x| m.max(x.1.abs()));
        let emax = e.iter().fold(emax, |m, x| m.max(x.abs()));
        if ext.len() < npts {
            return Err(Error::Solver(format!(
                "exchange found {} alternation points, need {npts}",
                ext.len()
            )));
        }
        reference = ext.iter().map(|x| x.0).collect();
        if (emax - level) <= 1e-9 * emax {
            return Ok(RemezResult { epsilon: emax, level, reference, cheb: d, iterations: it + 1 });
        }
    }
    let epsilon = search_grid(big_k, 20_000).iter().fold(0.0f64, |m, &p| m.max(err(&d, p).abs()));
    Err(Error::Solver(format!(
        "exchange did not converge in {max_iter} iterations (level {level:e}, error {epsilon:e})"
    )))
}

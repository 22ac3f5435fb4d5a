//! Discretizations of `[0, 1]`.

use std::f64::consts::PI;

use crate::error::{input, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Uniform,
    Chebyshev,
    /// Chebyshev points plus a geometric tail `2^-j / K` resolving `p ~ 1/K`.
    BoundaryRefined,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Uniform => "uniform",
            Scheme::Chebyshev => "chebyshev",
            Scheme::BoundaryRefined => "boundary-refined",
        }
    }
}

/// Strictly increasing points starting at 0 and ending at 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub points: Vec<f64>,
    pub scheme: Scheme,
    /// Group size the boundary refinement was built for.
    pub k: Option<usize>,
}

pub const DEFAULT_M: usize = 4096;
pub const GEOMETRIC_DEPTH: i32 = 40;

impl Grid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Interior and right endpoint, i.e. every point except `p = 0`.
    pub fn positive(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().copied().filter(|&p| p > 0.0)
    }

    pub fn from_points(mut pts: Vec<f64>, scheme: Scheme, k: Option<usize>) -> Result<Grid> {
        if pts.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return input("grid points must lie in [0, 1]");
        }
        pts.push(0.0);
        pts.push(1.0);
        pts.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        pts.dedup();
        Ok(Grid { points: pts, scheme, k })
    }
}

fn uniform(m: usize) -> Vec<f64> {
    (0..m).map(|j| j as f64 / (m - 1) as f64).collect()
}

fn chebyshev(m: usize) -> Vec<f64> {
    (0..m)
        .map(|j| {
            if j == 0 {
                0.0
            } else if j == m - 1 {
                1.0
            } else {
                0.5 - 0.5 * (PI * j as f64 / (m - 1) as f64).cos()
            }
        })
        .collect()
}

fn geometric(k: usize) -> Vec<f64> {
    (0..=GEOMETRIC_DEPTH)
        .flat_map(|j| {
            let base = 2f64.powi(-j) / k as f64;
            [base, 1.5 * base]
        })
        .filter(|&p| p > 0.0 && p <= 1.0)
        .collect()
}

pub fn build_grid(k: usize, m: usize, scheme: Scheme) -> Result<Grid> {
    if m < 2 {
        return input(format!("grid needs at least 2 points, got {m}"));
    }
    if k == 0 {
        return input("K must be positive");
    }
    match scheme {
        Scheme::Uniform => Grid::from_points(uniform(m), scheme, None),
        Scheme::Chebyshev => Grid::from_points(chebyshev(m), scheme, None),
        Scheme::BoundaryRefined => {
            let mut pts = chebyshev(m);
            pts.extend(geometric(k));
            Grid::from_points(pts, scheme, Some(k))
        }
    }
}

/// The default solve grid for group size `k`.
pub fn default_grid(k: usize) -> Grid {
    build_grid(k, DEFAULT_M, Scheme::BoundaryRefined).expect("valid defaults")
}

/// Dense certification grid: `10 m` Chebyshev points, `10^5` uniform points
/// and the geometric tail.
pub fn certification_grid(k: usize, m: usize) -> Grid {
    let mut pts = chebyshev(10 * m);
    pts.extend(uniform(100_000));
    pts.extend(geometric(k));
    Grid::from_points(pts, Scheme::BoundaryRefined, Some(k)).expect("valid points")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_eleven() {
        let g = build_grid(16, 11, Scheme::Uniform).unwrap();
        assert_eq!(g.len(), 11);
        for (j, p) in g.points.iter().enumerate() {
            assert!((p - j as f64 / 10.0).abs() < 1e-15);
        }
    }

    #[test]
    fn refined_grid_resolves_boundary_layer() {
        let g = build_grid(16, 4096, Scheme::BoundaryRefined).unwrap();
        assert!(g.points.iter().filter(|&&p| p <= 0.25).count() >= 32);
        let g = build_grid(64, 4096, Scheme::BoundaryRefined).unwrap();
        let smallest = g.positive().next().unwrap();
        assert!(smallest <= 2f64.powi(-10) / 64.0);
        let g = build_grid(256, 4096, Scheme::BoundaryRefined).unwrap();
        assert!(g.points.iter().filter(|&&p| p <= 4.0 / 256.0).count() >= 32);
    }

    #[test]
    fn strictly_increasing_with_endpoints() {
        for scheme in [Scheme::Uniform, Scheme::Chebyshev, Scheme::BoundaryRefined] {
            let g = build_grid(8, 300, scheme).unwrap();
            assert_eq!(g.points[0], 0.0);
            assert_eq!(*g.points.last().unwrap(), 1.0);
            assert!(g.points.windows(2).all(|w| w[0] < w[1]));
        }
    }
}

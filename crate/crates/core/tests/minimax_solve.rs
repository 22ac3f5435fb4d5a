use polyreward::binom::{gradient_weighted_bias, sup_bias};
use polyreward::estimators::{plugin_log_table, taylor_bt_table};
use polyreward::grid::{build_grid, default_grid, Scheme};
use polyreward::minimax::{scaling_study, solve_minimax, MinimaxOptions};
use polyreward::remez::remez_minimax;
use polyreward::table::{load_table, save_table};

/// Golden values of this repository's LP on the default grid.
const GOLDEN: [(usize, f64); 4] = [(4, 1.288_206_605e-2), (8, 4.001_575_801e-3), (16, 1.123_928_445e-3), (32, 2.984_513_320e-4)];

fn fast() -> MinimaxOptions {
    MinimaxOptions { certify: false, ..Default::default() }
}

#[test]
fn golden_values_and_feasibility() {
    for (k, eps) in GOLDEN {
        let g = default_grid(k);
        let s = solve_minimax(k, &g, &fast()).unwrap();
        assert!((s.epsilon / eps - 1.0).abs() < 1e-8, "K={k}: {}", s.epsilon);
        let worst = g.points.iter().map(|&p| gradient_weighted_bias(&s.table, p).abs()).fold(0.0, f64::max);
        assert!(worst <= s.lp_epsilon + 1e-9, "K={k}: {worst} vs LP {}", s.lp_epsilon);
    }
}

#[test]
fn worst_grid_point_of_k16_attains_epsilon() {
    let g = default_grid(16);
    let s = solve_minimax(16, &g, &fast()).unwrap();
    let at = g.points.iter().map(|&p| gradient_weighted_bias(&s.table, p).abs()).fold(0.0, f64::max);
    assert_eq!(at, s.epsilon);
    let oracle = remez_minimax(16, 100).unwrap().epsilon;
    assert!((at / oracle - 1.0).abs() < 1e-4);
}

#[test]
fn solves_are_bit_identical() {
    let g = default_grid(12);
    let a = solve_minimax(12, &g, &fast()).unwrap();
    let b = solve_minimax(12, &g, &fast()).unwrap();
    assert_eq!(a.table, b.table);
    assert!(a.table.coeffs.iter().zip(&b.table.coeffs).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn dominates_closed_forms() {
    for k in [4, 8, 16, 32] {
        let g = default_grid(k);
        let eps = solve_minimax(k, &g, &fast()).unwrap().epsilon;
        let c0 = remez_minimax(k, 100).unwrap().c0();
        assert!(eps <= sup_bias(&taylor_bt_table(k, 1.0, c0).unwrap(), &g));
        for alpha in [0.25, 0.5, 1.0] {
            assert!(eps <= sup_bias(&plugin_log_table(k, 1.0, alpha, 2, false).unwrap(), &g));
        }
    }
}

#[test]
fn scaling_study_edge_cases() {
    assert!(scaling_study(&[], 256, &fast()).unwrap().is_empty());
    let one = scaling_study(&[8], 1024, &fast()).unwrap();
    assert_eq!(one.len(), 1);
    assert!(one[0].ratio_to_prev.is_none());
    assert!(scaling_study(&[16, 8], 256, &fast()).is_err());
}

#[test]
fn uniform_grid_gives_a_lower_epsilon() {
    // Discretisation can only relax the constraints.
    let coarse = solve_minimax(8, &build_grid(8, 200, Scheme::Uniform).unwrap(), &fast()).unwrap();
    let fine = solve_minimax(8, &default_grid(8), &fast()).unwrap();
    assert!(coarse.epsilon <= fine.epsilon * (1.0 + 1e-9));
}

#[test]
fn saved_table_keeps_solver_metadata() {
    let s = solve_minimax(16, &default_grid(16), &MinimaxOptions::default()).unwrap();
    assert!(s.certified());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("minimax_K16.json");
    save_table(&s.table, &path).unwrap();
    let t = load_table(&path).unwrap();
    assert_eq!(t.meta_f64("epsilon"), Some(s.epsilon));
    assert_eq!(t.meta_f64("grid").map(|g| g as usize), Some(default_grid(16).len()));
    assert!(t.meta_f64("certified_epsilon").unwrap() <= 1.05 * s.epsilon);
}

#[test]
fn k128_table_is_refused_rather_than_returned_wrong() {
    let r = solve_minimax(128, &default_grid(128), &fast());
    assert!(r.is_err());
}

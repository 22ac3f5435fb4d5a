// The minimax-bias table from the linear program, with its certificate.

use polyreward::grid::default_grid;
use polyreward::minimax::{solve_minimax, MinimaxOptions};
use polyreward::remez::remez_minimax;

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    for k in [4, 8, 16] {
        let sol = solve_minimax(k, &default_grid(k), &MinimaxOptions::default())?;
        let oracle = remez_minimax(k, 100)?;
        println!(
            "K={k:>2}  LP ε={:.6e}  certified={:.6e}  exchange ε={:.6e}  alternation={} (need {})",
            sol.epsilon,
            sol.certified_epsilon.unwrap_or(f64::NAN),
            oracle.epsilon,
            sol.alternation,
            k + 2
        );
        assert!(sol.certified() && sol.equioscillates());
        assert!((sol.epsilon / oracle.epsilon - 1.0).abs() < 0.01);
    }
    let sol = solve_minimax(16, &default_grid(16), &MinimaxOptions { certify: false, ..Default::default() })?;
    println!("K=16 table: c_0={:.5} c_1={:.5} c_16={:.2e}", sol.table.coeffs[0], sol.table.coeffs[1], sol.table.coeffs[16]);
    Ok(())
}

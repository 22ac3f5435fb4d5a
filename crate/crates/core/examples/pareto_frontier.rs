// Variance-optimal tables along the bias budget, and the dominance check.

use polyreward::aqp::{geometric_budgets, AqpOptions, AqpSolver};
use polyreward::estimators::fallback_c0;
use polyreward::grid::default_grid;

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let k = 8;
    let solver = AqpSolver::new(k, default_grid(k), AqpOptions { certify: false, ..Default::default() })?;
    let eps_star = solver.epsilon_star();
    println!("ε*({k}) = {eps_star:.6e}");

    let frontier = solver.pareto_trace(&geometric_budgets(eps_star, 5))?;
    for pt in &frontier {
        println!("ε = {:>2}·ε*   max_p E[R²] = {:.4}", (pt.epsilon / eps_star).round(), pt.v);
    }
    assert!(frontier.windows(2).all(|w| w[1].v <= w[0].v * (1.0 + 1e-6)));

    let report = solver.dominance_check(&frontier[4], fallback_c0(k), 3)?;
    for c in &report.competitors {
        println!("  {:<24} sup bias {:.3e}  v {:.3}  dominated {:?}", c.name, c.sup_bias, c.v, c.dominated);
    }
    println!("dominance holds: {}", report.holds());

    match solver.solve(0.9 * eps_star) {
        Err(e) => println!("below ε*: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}

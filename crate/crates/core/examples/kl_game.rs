// The KL coherence game with different reward tables.

use polyreward::estimators::plugin_log_table;
use polyreward::game::{exact_ne, run_game_grpo, GameSpec};
use polyreward::grid::default_grid;
use polyreward::minimax::{solve_minimax, MinimaxOptions};

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    0.5 * (v[(v.len() - 1) / 2] + v[v.len() / 2])
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let spec = GameSpec::kl_toy();
    let ne = exact_ne(&spec)?;
    println!("NE marginal {:.4?} (q_min = {:.4})", ne.marginal, spec.q_min());

    let minimax = solve_minimax(spec.k, &default_grid(spec.k), &MinimaxOptions { certify: false, ..Default::default() })?.table;
    let plugin = plugin_log_table(spec.k, spec.beta, 1.0, spec.z_size(), false)?;
    for (name, table) in [("minimax", &minimax), ("plugin_log(α=1)", &plugin)] {
        let errs: Vec<f64> = (0..10).map(|s| run_game_grpo(&spec, table, 2000, 0.05, s).map(|t| t.final_l1_error())).collect::<Result<_, _>>()?;
        println!("{name:<16} median l1 error to NE over 10 seeds: {:.4}", median(errs));
    }
    Ok(())
}

// Plug-in and Taylor-corrected log rewards and their exact bias.

use polyreward::binom::{bias_profile, gradient_weighted_bias};
use polyreward::estimators::{fallback_c0, plugin_log_table, taylor_bt_table};
use polyreward::grid::default_grid;

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let k = 16;
    let grid = default_grid(k);
    let tables = [
        plugin_log_table(k, 1.0, 1.0, 3, false)?,
        plugin_log_table(k, 1.0, 0.5, 3, false)?,
        taylor_bt_table(k, 1.0, fallback_c0(k))?,
    ];
    for t in &tables {
        let prof = bias_profile(t, &grid);
        println!(
            "{:<11} alpha={:<4} sup |p E[R] - p ln p| = {:.4e} at p = {:.4}",
            t.method.as_str(),
            t.meta.get("alpha").map(|a| a.to_string()).unwrap_or_else(|| "-".into()),
            prof.sup_bias,
            prof.argmax_bias()
        );
    }

    // Rare answers are penalised: the reward sits below ln p at p = 1/K.
    let p = 1.0 / k as f64;
    let b = gradient_weighted_bias(&tables[1], p) / p;
    println!("plug-in (alpha=0.5) at p=1/K: E[R] - ln p = {b:.4}");

    match plugin_log_table(k, 1.0, 0.0, 3, false) {
        Err(e) => println!("alpha=0 without clamping: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}

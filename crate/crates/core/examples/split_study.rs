// Sample splitting with a control variate, and its Rao–Blackwellization.

use polyreward::analysis::{rao_blackwell_table, split_estimator_stats, taylor_maker, C0Rule, Gamma};
use polyreward::binom::variance;

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let (k, k1) = (64, 32);
    let make = taylor_maker(C0Rule::Minimax, 1.0);
    let base = make(k1)?;
    println!("   p   gamma*  var_split/var_full  bias_split/bias_full  var_RB/var_split");
    for p in [0.1, 0.3, 0.5] {
        let r = split_estimator_stats(k, k1, p, &make, Gamma::Optimal)?;
        let rb = rao_blackwell_table(k1, r.k2, &base, r.gamma)?;
        println!(
            "{p:>5}  {:>6.3}  {:>18.3}  {:>20.3}  {:>16.3}",
            r.gamma,
            r.var_split / r.var_full,
            r.bias_split / r.bias_full,
            variance(&rb, p) / r.var_split
        );
    }
    Ok(())
}

// Minimum-variance unbiased tables for polynomial rewards.

use polyreward::binom::expected_value;
use polyreward::estimators::{quadratic_table, u_statistic_table, PolynomialReward, Sign};

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    // u(q) = β(q + q²/2) with the diversity sign.
    let reward = PolynomialReward::new(vec![1.0, 0.5], Sign::Diversity, 1.0)?;
    let t = u_statistic_table(&reward, 8)?;
    println!("coeffs: {:.4?}", t.coeffs);
    println!("shift recorded in meta: {}", t.meta["shift"]);

    let mut worst = 0.0f64;
    for i in 0..=100 {
        let p = i as f64 / 100.0;
        worst = worst.max((expected_value(&t, p) - reward.target(p)).abs());
    }
    println!("max |E[table] - target| on 101 points: {worst:e}");
    assert!(worst < 1e-12);

    let q = quadratic_table(2, 1.0)?;
    println!("quadratic game, K=2: {:?}", q.coeffs);

    match u_statistic_table(&PolynomialReward::new(vec![0.0, 0.0, 1.0], Sign::Coherence, 1.0)?, 2) {
        Err(e) => println!("degree 3 from K=2: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}

// The Euclidean diversity game: sampled-group play with an unbiased table,
// stochastic mirror descent, and the full-gradient variant.

use polyreward::estimators::{euclid_table, PolynomialReward, Sign};
use polyreward::game::{exact_ne, run_game_grpo, run_mirror_descent, run_mirror_descent_exact, GameSpec, StepRule};

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let spec = GameSpec::euclid_toy();
    let ne = exact_ne(&spec)?;
    println!("NE policy {:.4?}  marginal {:.4?}", ne.policy, ne.marginal);

    let table = euclid_table(spec.k, spec.beta)?;
    let run = run_game_grpo(&spec, &table, 2000, 0.01, 7)?;
    println!("GRPO T=2000: gap {:.2e}  l1 error {:.2e}", run.final_gap(), run.final_l1_error());

    let reward = PolynomialReward::new(vec![1.0], Sign::Diversity, spec.beta)?;
    for t in [100, 1000, 10000] {
        let md = run_mirror_descent(&spec, &reward, t, StepRule::Horizon(2.0), 7)?;
        println!("mirror descent T={t:>5}: average-iterate gap {:.2e}", md.final_gap());
    }
    let exact = run_mirror_descent_exact(&spec, 2000, 0.5)?;
    println!("full-gradient variant: gap {:.2e} after {} steps", exact.final_gap(), exact.last().t);
    Ok(())
}

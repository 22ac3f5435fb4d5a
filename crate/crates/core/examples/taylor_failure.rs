// The Taylor-corrected log is accurate pointwise but not uniformly.

use polyreward::analysis::{taylor_uniform_failure, C0Rule};

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    for rule in [C0Rule::Minimax, C0Rule::Fallback] {
        println!("c0 rule: {rule:?}");
        for r in taylor_uniform_failure(&[16, 32, 64, 128], rule)? {
            println!(
                "  K={:>3}  sup bias {:.3e} at p·K = {:.2}  sup·K = {:.3}  |bias(1/2)|·K² = {:.3}  sup/ε* = {:>6.1}  ratio {}",
                r.k,
                r.sup_bias,
                r.argmax_p * r.k as f64,
                r.sup_bias_times_k,
                r.pointwise_k2,
                r.sup_bias / r.epsilon_star,
                r.ratio_to_prev.map(|x| format!("{x:.3}")).unwrap_or_default()
            );
        }
    }
    Ok(())
}

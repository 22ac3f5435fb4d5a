// Exact moments of a count table under `X ~ Binomial(K, p)`.

use num_rational::BigRational;
use polyreward::binom::{bernstein_row, expected_value, expected_value_exact, second_moment, to_rational, variance};
use polyreward::estimators::euclid_table;

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let t = euclid_table(4, 1.0)?;
    println!("euclid table K=4: {:?}", t.coeffs);

    let w = bernstein_row(4, 0.3);
    println!("B_k,4(0.3) = {w:.5?} (sum {:.17})", w.iter().sum::<f64>());

    for p in [0.1, 0.3, 0.5] {
        println!(
            "p={p}: E={:.6} (1-p={:.6})  E[R^2]={:.6}  Var={:.6}",
            expected_value(&t, p),
            1.0 - p,
            second_moment(&t, p),
            variance(&t, p)
        );
    }

    let exact: Vec<BigRational> = t.coeffs.iter().map(|&c| to_rational(c)).collect();
    let quarter = BigRational::new(1.into(), 4.into());
    let e = expected_value_exact(&exact, &quarter);
    println!("exact E at p=1/4: {e}");
    assert_eq!(e, BigRational::new(3.into(), 4.into()));
    Ok(())
}

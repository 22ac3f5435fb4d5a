use polyreward::binom::{expected_value, gradient_weighted_bias};
use polyreward::estimators::{euclid_table, plugin_log_table, PolynomialReward, Sign};
use polyreward::game::*;
use polyreward::grid::default_grid;
use polyreward::minimax::{solve_minimax, MinimaxOptions};
use proptest::prelude::*;

/// Minimiser of `a/2 ||x - x0||^2 + <c, x>` over the simplex by enumerating
/// supports and solving each KKT system directly.
fn simplex_qp_oracle(a: f64, x0: &[f64], c: &[f64]) -> f64 {
    let n = x0.len();
    let obj = |x: &[f64]| -> f64 {
        x.iter().zip(x0).zip(c).map(|((xi, x0i), ci)| 0.5 * a * (xi - x0i).powi(2) + ci * xi).sum()
    };
    let mut best = f64::INFINITY;
    for mask in 1u32..(1 << n) {
        let support: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let free: f64 = support.iter().map(|&i| x0[i] - c[i] / a).sum();
        let shift = (1.0 - free) / support.len() as f64;
        let mut x = vec![0.0; n];
        for &i in &support {
            x[i] = x0[i] - c[i] / a + shift;
        }
        if x.iter().all(|&v| v >= -1e-15) {
            best = best.min(obj(&x));
        }
    }
    best
}

#[test]
fn euclid_gap_matches_brute_force_oracle() {
    let spec = GameSpec::euclid_toy();
    let b = spec.beta;
    let nz = spec.z_size();
    let uniform = vec![1.0 / nz as f64; nz];
    let u = dual_u(&spec, &uniform);
    let pi = spec.ref_policy.clone();
    let nu = spec.marginal(&pi);
    let upper = 0.5 * b * nu.iter().map(|x| x * x).sum::<f64>();
    let c: Vec<f64> = spec.parser.iter().map(|&z| u[z]).collect();
    let min_pi = simplex_qp_oracle(b, &spec.ref_policy, &c);
    // max_q <q,u> - b/2 ||q||^2 = -min_q b/2 ||q||^2 - <q,u>
    let conj = -simplex_qp_oracle(b, &vec![0.0; nz], &u.iter().map(|x| -x).collect::<Vec<_>>());
    let oracle = upper - (min_pi - conj);
    let gap = duality_gap(&spec, &pi, &uniform);
    assert!((gap - oracle).abs() < 1e-6, "{gap} vs {oracle}");
    assert!(gap > 0.0);
}

#[test]
fn kl_best_response_is_the_tilted_reference() {
    let spec = GameSpec::kl_toy();
    let q = [0.5, 0.3, 0.2];
    let pi = optimal_policy(&spec, &q).unwrap();
    let w: Vec<f64> = spec.ref_policy.iter().zip(&spec.parser).map(|(p, &z)| (p.ln() + q[z].ln()).exp()).collect();
    let s: f64 = w.iter().sum();
    for (a, b) in pi.iter().zip(&w) {
        assert!((a - b / s).abs() < 1e-14);
    }
}

#[test]
fn equilibria_have_zero_gap() {
    for spec in [GameSpec::euclid_toy(), GameSpec::kl_toy()] {
        let ne = exact_ne(&spec).unwrap();
        assert!(duality_gap(&spec, &ne.policy, &ne.q).abs() < 1e-9, "{:?}", spec.geometry);
        let s: f64 = ne.policy.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }
}

#[test]
fn links_match_the_geometries() {
    assert_eq!(Geometry::Euclid.link(), Some(&[1.0][..]));
    assert_eq!(Geometry::Cubic.link(), Some(&[0.0, 1.0][..]));
    assert_eq!(Geometry::Kl.link(), None);
    // The euclid conjugate maximiser is the simplex projection.
    let w = [0.3, -0.2, 0.9];
    assert_eq!(conjugate_argmax(&[1.0], &w), sparsemax_project(&w));
    // Cubic: q_z = sqrt((w_z - λ)_+) on the support.
    let q = conjugate_argmax(&[0.0, 1.0], &w);
    assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let lam: Vec<f64> = w.iter().zip(&q).filter(|(_, q)| **q > 0.0).map(|(w, q)| w - q * q).collect();
    assert!(lam.windows(2).all(|p| (p[0] - p[1]).abs() < 1e-9), "{lam:?}");
}

#[test]
fn floor_target_respects_floor() {
    let t = floor_target(&[0.9, 0.1, 0.0], 0.05);
    assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    assert_eq!(t[2], 0.05);
    assert!((t[0] / t[1] - 9.0).abs() < 1e-12);
}

#[test]
fn grpo_replays_bit_for_bit() {
    let spec = GameSpec::kl_toy();
    let table = plugin_log_table(16, 1.0, 1.0, 3, false).unwrap();
    let a = run_game_grpo(&spec, &table, 200, 0.05, 11).unwrap();
    let b = run_game_grpo(&spec, &table, 200, 0.05, 11).unwrap();
    assert_eq!(a, b);
    let c = run_game_grpo(&spec, &table, 200, 0.05, 12).unwrap();
    assert_ne!(a.records, c.records);
}

#[test]
fn euclid_grpo_approaches_equilibrium() {
    let spec = GameSpec::euclid_toy();
    let table = euclid_table(16, 1.0).unwrap();
    let tr = run_game_grpo(&spec, &table, 2000, 0.01, 3).unwrap();
    assert_eq!(tr.records[0].t, 0);
    assert!(tr.final_gap() <= 1e-3, "{}", tr.final_gap());
}

#[test]
fn mirror_descent_first_record_is_the_initial_state() {
    let spec = GameSpec::euclid_toy();
    let r = PolynomialReward::new(vec![1.0], Sign::Diversity, 1.0).unwrap();
    let tr = run_mirror_descent(&spec, &r, 1, StepRule::Constant(0.1), 0).unwrap();
    assert_eq!(tr.records.len(), 1);
    let nz = spec.z_size();
    let pi = vec![1.0 / spec.traces.len() as f64; spec.traces.len()];
    let u = dual_u(&spec, &vec![1.0 / nz as f64; nz]);
    assert!((tr.final_gap() - duality_gap_u(&spec, &pi, &u)).abs() < 1e-15);
}

#[test]
fn mirror_descent_rejects_mismatched_reward() {
    let spec = GameSpec::euclid_toy();
    let wrong = PolynomialReward::new(vec![0.0, 1.0], Sign::Diversity, 1.0).unwrap();
    assert!(run_mirror_descent(&spec, &wrong, 10, StepRule::Constant(0.1), 0).is_err());
    assert!(run_mirror_descent(&GameSpec::kl_toy(), &wrong, 10, StepRule::Constant(0.1), 0).is_err());
}

#[test]
fn exact_mirror_descent_is_monotone() {
    let spec = GameSpec::euclid_toy();
    let tr = run_mirror_descent_exact(&spec, 500, 0.5).unwrap();
    assert_eq!(tr.records.len(), 501);
    assert!(tr.records.windows(2).all(|w| w[1].gap <= w[0].gap + 1e-15));
    assert!(tr.final_gap() < 1e-10);
}

#[test]
fn log_schedule_ends_at_horizon() {
    assert_eq!(log_schedule(1), vec![1]);
    let s = log_schedule(1000);
    assert_eq!(*s.last().unwrap(), 1000);
    assert!(s.windows(2).all(|w| w[0] < w[1]));
    assert!((25..=35).contains(&s.len()), "{}", s.len());
}

fn plugin_shortfall_at_one_over_k(k: usize, z_size: usize) -> (f64, f64) {
    let p = 1.0 / k as f64;
    let plugin = plugin_log_table(k, 1.0, 0.5, z_size, false).unwrap();
    (p.ln() - expected_value(&plugin, p), 0.5 * (1.0 - p) / (2.0 * k as f64 * p))
}

#[test]
fn plugin_penalises_rare_answers_on_large_answer_spaces() {
    let k = 16;
    for z_size in [17, 32, 100] {
        let (shortfall, bound) = plugin_shortfall_at_one_over_k(k, z_size);
        assert!(shortfall >= bound, "|Z|={z_size}: {shortfall} < {bound}");
    }
    let p = 1.0 / k as f64;
    let mm = solve_minimax(k, &default_grid(k), &MinimaxOptions { certify: false, ..Default::default() }).unwrap();
    assert!(gradient_weighted_bias(&mm.table, p).abs() <= mm.epsilon * (1.0 + 1e-9));
}

#[test]
#[ignore = "unattainable: see decisions ledger"]
fn plugin_penalises_rare_answers_on_the_toy_answer_space() {
    let (shortfall, bound) = plugin_shortfall_at_one_over_k(16, 3);
    assert!(shortfall >= bound, "{shortfall} < {bound}");
}

proptest! {
    #[test]
    fn sparsemax_properties(v in prop::collection::vec(-3.0f64..3.0, 1..12), w in prop::collection::vec(-3.0f64..3.0, 12), c in -5.0f64..5.0) {
        let p = sparsemax_project(&v);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&x| x >= 0.0));
        // Idempotent.
        let pp = sparsemax_project(&p);
        prop_assert!(p.iter().zip(&pp).all(|(a, b)| (a - b).abs() < 1e-12));
        // Shift invariant.
        let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
        let ps = sparsemax_project(&shifted);
        prop_assert!(p.iter().zip(&ps).all(|(a, b)| (a - b).abs() < 1e-12));
        // Threshold characterisation.
        let tau = sparsemax_threshold(&v);
        prop_assert!(p.iter().zip(&v).all(|(pi, vi)| (pi - (vi - tau).max(0.0)).abs() < 1e-12));
        // Non-expansive.
        let w = &w[..v.len()];
        let pw = sparsemax_project(w);
        let d_in: f64 = v.iter().zip(w).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let d_out: f64 = p.iter().zip(&pw).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        prop_assert!(d_out <= d_in + 1e-12);
    }

    #[test]
    fn gap_is_nonnegative(raw in prop::collection::vec(0.01f64..1.0, 6), qraw in prop::collection::vec(0.05f64..1.0, 3)) {
        let s: f64 = raw.iter().sum();
        let pi: Vec<f64> = raw.iter().map(|x| x / s).collect();
        let sq: f64 = qraw.iter().sum();
        let q: Vec<f64> = qraw.iter().map(|x| x / sq).collect();
        for spec in [GameSpec::euclid_toy(), GameSpec::kl_toy()] {
            prop_assert!(duality_gap(&spec, &pi, &q) >= -1e-12);
        }
    }

    #[test]
    fn euclid_gap_ignores_constant_shifts_of_u(raw in prop::collection::vec(0.01f64..1.0, 6), c in -2.0f64..2.0) {
        let spec = GameSpec::euclid_toy();
        let s: f64 = raw.iter().sum();
        let pi: Vec<f64> = raw.iter().map(|x| x / s).collect();
        let u = dual_u(&spec, &[0.5, 0.3, 0.2]);
        let shifted: Vec<f64> = u.iter().map(|x| x + c).collect();
        prop_assert!((duality_gap_u(&spec, &pi, &u) - duality_gap_u(&spec, &pi, &shifted)).abs() < 1e-9);
    }
}

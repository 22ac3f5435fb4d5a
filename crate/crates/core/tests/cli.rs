use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use polyreward::table::{load_table, save_table};
use polyreward::{EstimatorTable, Method};

fn polyreward(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polyreward"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env_remove("POLYREWARD_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data").join(name)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn ustat_degree_one_is_one_minus_frequency() {
    let dir = tempfile::tempdir().unwrap();
    let o = polyreward(dir.path(), &["synth", "ustat", "--K", "4", "--degree", "1", "--coeffs", "1", "--sign", "+1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().count(), 1);
    let t = load_table(dir.path().join("ustat_K4_d1.json")).unwrap();
    assert_eq!(t.coeffs, vec![1.0, 0.75, 0.5, 0.25, 0.0]);
    assert!(t.meta.contains_key("job"));
}

#[test]
fn profile_of_zero_table_is_max_of_p_log_p() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("zero.json");
    save_table(&EstimatorTable::new(8, 1.0, Method::UStatistic, vec![0.0; 9]).unwrap(), &table).unwrap();
    let o = polyreward(dir.path(), &["profile", "--table", table.to_str().unwrap(), "--grid", "101"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("profile_zero.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# {"));
    assert_eq!(lines.next().unwrap(), "p,weighted_bias,second_moment");
    let (mut sup, mut oracle) = (0.0f64, 0.0f64);
    for l in lines {
        let f: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
        sup = sup.max(f[1].abs());
        if f[0] > 0.0 {
            oracle = oracle.max(-f[0] * f[0].ln());
        }
    }
    assert_eq!(sup, oracle);
    assert!((oracle - (-1f64).exp()).abs() < 1e-3);
    assert!(stdout(&o).contains(&format!("sup_bias={sup:.6e}")));
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let tables = tempfile::tempdir().unwrap();
    let o = polyreward(tables.path(), &["synth", "ustat", "--K", "16", "--degree", "1", "--coeffs", "1", "--sign", "+1"]);
    assert!(o.status.success());
    let table = tables.path().join("ustat_K16_d1.json");
    let spec = data("euclid_toy.json");
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        let o = polyreward(
            dir.path(),
            &["simulate", "--spec", spec.to_str().unwrap(), "--table", table.to_str().unwrap(), "--T", "2000", "--seed", "7"],
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let csv = std::fs::read(dir.path().join("trace_grpo_seed7.csv")).unwrap();
        let json = std::fs::read(dir.path().join("trace_grpo_seed7.json")).unwrap();
        (csv, json, o.stdout)
    };
    assert_eq!(run(), run());
}

#[test]
fn mirror_mode_reads_the_reward_from_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = polyreward(dir.path(), &["synth", "ustat", "--K", "16", "--degree", "1", "--coeffs", "1", "--sign", "+1"]);
    assert!(o.status.success());
    let table = dir.path().join("ustat_K16_d1.json");
    let spec = data("euclid_toy.json");
    let o = polyreward(
        dir.path(),
        &["simulate", "--spec", spec.to_str().unwrap(), "--table", table.to_str().unwrap(), "--T", "100", "--seed", "1", "--mode", "mirror"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("trace_mirror_seed1.csv").exists());
}

#[test]
fn errors_are_one_line_with_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["synth", "ustat", "--K", "4", "--degree", "1", "--coeffs", "1", "--sign", "+1", "--bogus"][..],
        &["profile", "--table", "/nonexistent/table.json"][..],
        &["synth", "ustat", "--K", "4", "--degree", "2", "--coeffs", "1", "--sign", "+1"][..],
        &["frobnicate"][..],
    ] {
        let o = polyreward(dir.path(), args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        let err = String::from_utf8_lossy(&o.stderr);
        assert_eq!(err.trim_end().lines().count(), 1, "{args:?}: {err}");
        assert!(o.stdout.is_empty());
    }
}

#[test]
fn env_var_overrides_out_dir() {
    let flag = tempfile::tempdir().unwrap();
    let env = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_polyreward"))
        .args(["synth", "closed-form", "--method", "taylor_bt", "--K", "8", "--c0", "fallback", "--out"])
        .arg(flag.path())
        .env("POLYREWARD_OUT_DIR", env.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(env.path().join("taylor_bt_K8.json").exists());
    assert!(!flag.path().join("taylor_bt_K8.json").exists());
}

#[test]
fn synth_minimax_certifies_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let o = polyreward(dir.path(), &["synth", "minimax", "--K", "8"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let t = load_table(dir.path().join("minimax_K8.json")).unwrap();
    assert!((t.meta_f64("epsilon").unwrap() / 4.001_575_801e-3 - 1.0).abs() < 1e-6);
}

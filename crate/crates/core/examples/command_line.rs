// Driving the command-line front end in-process.

use polyreward::cli::main_with;

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("polyreward-cli-{}", std::process::id()));
    let out = dir.to_string_lossy().into_owned();
    let spec = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/euclid_toy.json");
    let table = format!("{out}/ustat_K16_d1.json");

    let jobs: Vec<Vec<&str>> = vec![
        vec!["synth", "ustat", "--K", "16", "--degree", "1", "--coeffs", "1", "--sign", "+1"],
        vec!["synth", "closed-form", "--method", "taylor_bt", "--K", "16"],
        vec!["profile", "--table", &table],
        vec!["simulate", "--spec", spec, "--table", &table, "--T", "500", "--seed", "7"],
        vec!["synth", "ustat", "--K", "2", "--degree", "3", "--coeffs", "0,0,1", "--sign", "-1"],
    ];
    for args in jobs {
        let argv = ["polyreward"].into_iter().chain(args.iter().copied()).chain(["--out", out.as_str()]);
        let code = main_with(argv);
        println!("  -> exit {code}");
    }
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

// Saving and loading tables.

use polyreward::estimators::euclid_table;
use polyreward::table::{load_table, save_table, EstimatorTable};

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("polyreward-table-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("euclid_K4.json");

    let t = euclid_table(4, 1.0)?.with_meta("note", "example");
    save_table(&t, &path)?;
    print!("{}", std::fs::read_to_string(&path)?);
    let back = load_table(&path)?;
    assert_eq!(back, t);

    let broken = r#"{"schema":"estimator-table/v1","K":4,"beta":1,"method":"euclid","coeffs":[1,0.5]}"#;
    println!("short coeffs: {}", EstimatorTable::from_json_str(broken).unwrap_err());
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

//! Output files: CSV with a `#`-prefixed JSON header line, and JSON.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::error::Result;

/// Overrides the output directory given on the command line.
pub const OUT_DIR_ENV: &str = "POLYREWARD_OUT_DIR";

pub fn out_dir(flag: Option<&Path>) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(d) if !d.is_empty() => PathBuf::from(d),
        _ => flag.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(".")),
    }
}

pub fn csv_string(config: &Value, header: &[&str], rows: &[Vec<String>]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# {}", serde_json::to_string(config).expect("config serializes"));
    let _ = writeln!(s, "{}", header.join(","));
    for r in rows {
        let _ = writeln!(s, "{}", r.join(","));
    }
    s
}

pub fn write_csv(path: &Path, config: &Value, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    ensure_parent(path)?;
    std::fs::write(path, csv_string(config, header, rows))?;
    Ok(())
}

pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    ensure_parent(path)?;
    std::fs::write(path, serde_json::to_string_pretty(value).expect("value serializes") + "\n")?;
    Ok(())
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    Ok(())
}

/// Shortest round-trip representation; empty for `None`.
pub fn num(x: f64) -> String {
    x.to_string()
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_line_carries_config() {
        let s = csv_string(&serde_json::json!({"K": 4}), &["a", "b"], &[vec!["1".into(), "2".into()]]);
        assert_eq!(s, "# {\"K\":4}\na,b\n1,2\n");
    }
}

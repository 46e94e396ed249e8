//! Seeded `simulate -> aggregate -> fit -> dif -> icc` pipeline shared by
//! the golden-file test and the acceptance harness.

use std::path::{Path, PathBuf};
use std::process::Command;

pub const PARAMS: &str = r#"{
  "group_labels": ["north", "south", "east", "west"],
  "mu": [0.45, 0.0, -0.05, -0.05],
  "sigma": [1.0, 1.5, 1.0, 1.0],
  "thresholds": [-1.0, -0.2, 0.6],
  "group_sizes": [300, 300, 300, 300]
}
"#;

pub const STEPS: [&[&str]; 5] = [
    &["simulate", "--params", "params.json", "--seed", "20261014", "--format", "cases", "--out", "cases.csv"],
    &["aggregate", "--cases", "cases.csv", "--out", "counts.csv"],
    &["fit", "--counts", "counts.csv", "--penalty", "alignment", "--nu", "1.0", "--epsilon", "1e-4", "--se", "--out", "fit.json"],
    &["dif", "--fit", "fit.json", "--out", "dif.json", "--csv", "dif.csv"],
    &["icc", "--fit", "fit.json", "--theta=-4:4:21", "--out", "icc.csv", "--plot", "icc.svg"],
];

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden")
}

pub fn hetop(dir: &Path, args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_hetop"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("running hetop")
        .status
        .code()
        .unwrap_or(-1)
}

/// Runs the pipeline in `dir` and returns the sorted output file names.
pub fn run_pipeline(dir: &Path) -> Result<Vec<String>, String> {
    std::fs::write(dir.join("params.json"), PARAMS).map_err(|e| e.to_string())?;
    for step in STEPS {
        let code = hetop(dir, step);
        if code != 0 {
            return Err(format!("{} exited with {code}", step[0]));
        }
    }
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok().map(|e| e.file_name().to_string_lossy().into_owned()))
        .filter(|n| n != "params.json")
        .collect();
    names.sort();
    Ok(names)
}

/// Names of produced files that differ from (or are missing in) the golden
/// directory.
pub fn golden_mismatches(dir: &Path) -> Result<Vec<String>, String> {
    let names = run_pipeline(dir)?;
    let mut bad = Vec::new();
    for n in &names {
        let produced = std::fs::read(dir.join(n)).map_err(|e| e.to_string())?;
        match std::fs::read(golden_dir().join(n)) {
            Ok(expected) if expected == produced => {}
            _ => bad.push(n.clone()),
        }
    }
    let golden_count = std::fs::read_dir(golden_dir()).map(|d| d.count()).unwrap_or(0);
    if golden_count != names.len() {
        bad.push(format!("golden has {golden_count} files, run produced {}", names.len()));
    }
    Ok(bad)
}

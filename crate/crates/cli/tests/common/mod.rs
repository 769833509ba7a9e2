#![allow(dead_code)]

use std::path::{Path, PathBuf};

use sepsr_cli::ScenarioConfig;

pub fn scenario_path(file: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(file)
}

pub fn load_scenario(file: &str) -> ScenarioConfig {
    ScenarioConfig::load(scenario_path(file)).unwrap()
}

pub fn poly_config(out: &Path) -> ScenarioConfig {
    let mut cfg = load_scenario("poly.toml");
    cfg.output_dir = out.to_path_buf();
    cfg
}

/// Every `.csv` file in a directory, sorted by name, with its bytes.
pub fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

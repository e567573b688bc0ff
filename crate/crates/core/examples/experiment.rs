//! Runs a full experiment from a config file and prints the manifest path.
//!
//! ```text
//! cargo run --example experiment -- configs/heat.toml
//! ```

use std::path::PathBuf;

use riccati_mor::harness::{run_experiment, ExperimentConfig, Method, Preset, ProblemSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = match std::env::args().nth(1) {
        Some(path) => ExperimentConfig::load(&PathBuf::from(path))?,
        None => {
            let mut cfg = ExperimentConfig::new(ProblemSpec::preset(Preset::Heat), Method::ALL.to_vec());
            cfg.sweep = (1..=20).collect();
            cfg.out = std::env::temp_dir().join("riccati-mor-heat");
            cfg
        }
    };
    let report = run_experiment(&cfg)?;
    for o in &report.methods {
        println!("{:>6}: {:?} ({} rows)", o.method, o.status, o.history.len());
    }
    println!("manifest: {}", report.out_dir.join("manifest.json").display());
    Ok(())
}

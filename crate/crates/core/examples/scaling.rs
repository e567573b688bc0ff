//! Timing of GARK as the grid is refined, with the fitted log-log slope.

use riccati_mor::harness::{loglog_slope, scaling_sweep, ExperimentConfig, Method, Preset, ProblemSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = ExperimentConfig::new(ProblemSpec::preset(Preset::Heat), vec![Method::Gark]);
    cfg.out = std::env::temp_dir().join("riccati-mor-scaling");
    let rows = scaling_sweep(&cfg, &[0.1, 0.05, 0.025, 0.0125])?;
    for row in &rows {
        println!(
            "n = {:>6}  r = {:>3}  {:>8.3}s  {}",
            row.n,
            row.r.unwrap_or(0),
            row.elapsed_s,
            row.status
        );
    }
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.elapsed_s)).collect();
    if let Some(slope) = loglog_slope(&pts) {
        println!("time ~ n^{slope:.2}");
    }
    Ok(())
}

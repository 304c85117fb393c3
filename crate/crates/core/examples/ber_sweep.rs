//! A reduced BER sweep of every receiver in the default config, written as
//! results.json and results.csv under the given directory (default `out`).

use std::path::PathBuf;

use ledrx::sim::{run_sweep, to_csv, to_json, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "out".into()));
    let mut cfg = ExperimentConfig::default_config();
    cfg.snr_db = vec![12.0, 16.0, 20.0, 24.0];
    cfg.stopping.min_errors = 50;
    cfg.stopping.max_frames = 48;
    let result = run_sweep(&cfg)?;
    for p in &result.points {
        println!(
            "{:<26} {:>5.1} dB  {:.3e}  ({} frames)",
            p.receiver, p.snr_db, p.ber, p.frames
        );
    }
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("results.json"), to_json(&result)?)?;
    std::fs::write(dir.join("results.csv"), to_csv(&result))?;
    println!("wrote {}", dir.display());
    Ok(())
}

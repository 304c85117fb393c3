//! Data-aided retraining: 400 training symbols plus 400 decoded data symbols
//! against plain 400- and 800-symbol training.

use ledrx::sim::{run_frames, Experiment, ExperimentConfig};

fn main() -> ledrx::Result<()> {
    let mut cfg = ExperimentConfig::default_config();
    let labels = ["elm-turbo-data-aided-400", "elm-turbo-400", "elm-turbo"];
    cfg.receivers
        .retain(|r| labels.contains(&r.label().as_str()));
    let exp = Experiment::new(cfg)?;
    let frames = 40;
    for snr in [18.0, 20.0, 22.0] {
        print!("{snr} dB:");
        for label in labels {
            let p = run_frames(&exp.prepare(label)?, snr, 0, frames);
            print!("  {label} {:.2e}", p.ber);
            if p.diagnostics.retrain_fallbacks > 0 {
                print!(" ({} LS fallbacks)", p.diagnostics.retrain_fallbacks);
            }
        }
        println!();
    }
    Ok(())
}

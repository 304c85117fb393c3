//! RLS memory-polynomial post-distorter against the non-iterative ELM
//! post-distorter on the default LED channel.

use ledrx::sim::{run_frames, Experiment, ExperimentConfig};

fn main() -> ledrx::Result<()> {
    let mut cfg = ExperimentConfig::default_config();
    cfg.receivers
        .retain(|r| ["rls-poly", "elm-noniter"].contains(&r.label().as_str()));
    let exp = Experiment::new(cfg)?;
    let rls = exp.prepare("rls-poly")?;
    let elm = exp.prepare("elm-noniter")?;
    println!("snr    rls-poly   elm-noniter   log10 cond(R^T R)");
    for snr in [14.0, 18.0, 22.0, 26.0] {
        let a = run_frames(&rls, snr, 0, 30);
        let b = run_frames(&elm, snr, 0, 30);
        println!(
            "{snr:>4}   {:.3e}  {:.3e}     {:.2}",
            a.ber,
            b.ber,
            a.diagnostics.condition_log10_mean.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}

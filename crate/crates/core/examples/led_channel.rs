//! Prints the default LED channel: the static curve at the 8-PAM levels and
//! the memory taps acting on a short symbol burst.

use ledrx::channel::{noise_variance_for, ChannelModel};
use ledrx::sim::ExperimentConfig;

fn main() -> ledrx::Result<()> {
    let cfg = ExperimentConfig::default_config();
    let c = cfg.constellation.build()?;
    let ChannelModel::Hammerstein(h) = &cfg.channel else {
        unreachable!("the default channel is Hammerstein");
    };
    println!("taps {:?}", h.taps);
    println!("level    f(level)");
    for &a in c.levels() {
        println!("{a:.4}   {:.4}", h.static_response(a));
    }

    // An isolated high symbol between low ones shows the tail of the memory.
    let mut x = vec![c.levels()[0]; 6];
    x[2] = c.levels()[7];
    let z = cfg.channel.apply(&x);
    println!("burst in  {x:.3?}");
    println!("burst out {z:.3?}");
    println!(
        "noise variance at 20 dB: {:.3e}",
        noise_variance_for(&z, 20.0)?
    );
    Ok(())
}

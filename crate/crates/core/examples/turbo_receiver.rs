//! One frame through the ELM turbo receiver and the genie bound, with the
//! per-iteration trace.

use ledrx::sim::{Experiment, ExperimentConfig};
use ledrx::turbo::{
    run_turbo_with, train_with_projector, ChannelKnowledge, TurboConfig, TurboInput,
};

fn main() -> ledrx::Result<()> {
    let exp = Experiment::new(ExperimentConfig::default_config())?;
    let snr = 18.0;
    let frame = exp.frame(0, snr)?;
    let cfg = TurboConfig::default();
    let training = exp.training(cfg.training_length)?;
    let y = exp.received(&frame, training.len())?;

    let base = ledrx::elm::ElmModel::new(2 * cfg.window + 1, cfg.window + 1, cfg.hidden_nodes, 1)?;
    let inputs = ledrx::postdistort::channel_window_inputs(
        training,
        cfg.window,
        training.len() - cfg.window,
    );
    let projector = base.ridge_projector(&inputs, cfg.ridge)?;
    let model = train_with_projector(
        &base,
        &projector,
        training,
        &y[..training.len()],
        cfg.window,
    )?;

    let input = TurboInput {
        stream: &y,
        training,
        truth: Some(&frame.tx.info),
    };
    let mp = exp.channel.as_memory_polynomial()?;
    let runs = [
        (
            "elm",
            run_turbo_with(input, &exp.link, &cfg, ChannelKnowledge::Elm(model))?,
        ),
        (
            "genie",
            run_turbo_with(
                input,
                &exp.link,
                &cfg,
                ChannelKnowledge::Genie {
                    channel: &mp,
                    noise_variance: frame.noise_variance,
                },
            )?,
        ),
    ];
    for (name, out) in &runs {
        println!("{name} receiver at {snr} dB");
        for r in &out.trace.iterations {
            println!(
                "  iteration {}: {:>4} bit errors, mean |LLR| siso {:.2} decoder {:.2}, V {:.3?}",
                r.iteration,
                r.bit_errors.unwrap_or(0),
                r.siso_mean_abs_extrinsic,
                r.decoder_mean_abs_extrinsic,
                r.covariance
            );
        }
    }
    Ok(())
}

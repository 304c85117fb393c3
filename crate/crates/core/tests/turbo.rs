use ledrx::channel::{ChannelModel, HammersteinModel};
use ledrx::coding::bcjr_decode;
use ledrx::elm::{rmse, ElmModel};
use ledrx::postdistort::{
    beliefs_from_llrs, channel_windows, genie_likelihood_params, siso_postdistort,
    CovarianceSource, SisoElmPostDistorter,
};
use ledrx::sim::{run_frames, Experiment, ExperimentConfig, ReceiverKind, ReceiverSpec};
use ledrx::turbo::{
    retrain_data_aided, run_turbo_with, ChannelKnowledge, RetrainMethod, TurboConfig, TurboInput,
};

fn experiment(channel: ChannelModel, receivers: Vec<ReceiverSpec>) -> Experiment {
    let mut cfg = ExperimentConfig::default_config();
    cfg.channel = channel;
    cfg.receivers = receivers;
    cfg.snr_db = vec![20.0];
    Experiment::new(cfg).unwrap()
}

fn default_experiment() -> Experiment {
    let cfg = ExperimentConfig::default_config();
    Experiment::new(cfg).unwrap()
}

/// Channel ELM trained by least squares on a training pair, fixed hidden layer.
fn elm_for(y_train: &[f64], training: &[f64]) -> ElmModel {
    let ts = channel_windows(training, y_train, 2).unwrap();
    ElmModel::new(5, 3, 150, 99).unwrap().train_ls(&ts).unwrap()
}

#[test]
fn genie_on_memoryless_channel_is_error_free_at_high_snr() {
    let exp = experiment(
        ChannelModel::Hammerstein(HammersteinModel::new(vec![-0.6, 3.6, -2.0], vec![]).unwrap()),
        vec![ReceiverSpec::new(ReceiverKind::GenieTurbo)],
    );
    let rx = exp.prepare("genie-turbo").unwrap();
    let p = run_frames(&rx, 30.0, 0, 1);
    assert_eq!(p.bits, 1024);
    assert_eq!(p.errors, 0);
    assert_eq!(p.failures, 0);
}

#[test]
fn single_iteration_equals_one_demap_decode_pass_genie() {
    let exp = default_experiment();
    let frame = exp.frame(0, 18.0).unwrap();
    let y = exp.received(&frame, 0).unwrap();
    let mp = exp.channel.as_memory_polynomial().unwrap();
    let cfg = TurboConfig {
        max_iterations: 1,
        ..TurboConfig::default()
    };
    let out = run_turbo_with(
        TurboInput {
            stream: &y,
            training: &[],
            truth: None,
        },
        &exp.link,
        &cfg,
        ChannelKnowledge::Genie {
            channel: &mp,
            noise_variance: frame.noise_variance,
        },
    )
    .unwrap();

    let c = &exp.constellation;
    let prior = exp.link.initial_priors();
    let beliefs = beliefs_from_llrs(&prior, c).unwrap();
    let d = exp.link.data_symbols();
    let params = genie_likelihood_params(&mp, &beliefs, 0, d, frame.noise_variance, 2, c).unwrap();
    let siso = siso_postdistort(&y, 0, &prior, &params, c).unwrap();
    let dec = bcjr_decode(
        &exp.link.to_decoder(&siso.extrinsic).unwrap(),
        &exp.link.code,
    )
    .unwrap();
    assert_eq!(out.info_bits, dec.info_decisions());
    assert_eq!(out.trace.iterations.len(), 1);
}

#[test]
fn single_iteration_equals_one_demap_decode_pass_elm() {
    let exp = default_experiment();
    let frame = exp.frame(3, 22.0).unwrap();
    let training = exp.training(800).unwrap();
    let y = exp.received(&frame, 800).unwrap();
    let model = elm_for(&y[..800], training);
    let cfg = TurboConfig {
        max_iterations: 1,
        ..TurboConfig::default()
    };
    let out = run_turbo_with(
        TurboInput {
            stream: &y,
            training,
            truth: None,
        },
        &exp.link,
        &cfg,
        ChannelKnowledge::Elm(model.clone()),
    )
    .unwrap();

    let c = &exp.constellation;
    let prior = exp.link.initial_priors();
    let pd = SisoElmPostDistorter::new(model, c.clone())
        .unwrap()
        .with_zero_reference_subtracted(true)
        .with_reference_level(c.mean_level())
        .unwrap();
    let mut means = training.to_vec();
    means.extend(
        beliefs_from_llrs(&prior, c)
            .unwrap()
            .iter()
            .map(|b| b.mean(c)),
    );
    let d = exp.link.data_symbols();
    let source = CovarianceSource::Training {
        symbols: training,
        neighbor_mean: c.mean_level(),
    };
    let params = pd.likelihood_params(&y, &means, 800, d, source).unwrap();
    let siso = siso_postdistort(&y, 800, &prior, &params, c).unwrap();
    let dec = bcjr_decode(
        &exp.link.to_decoder(&siso.extrinsic).unwrap(),
        &exp.link.code,
    )
    .unwrap();
    assert_eq!(out.info_bits, dec.info_decisions());
}

#[test]
fn zero_virtual_length_is_training_only_tls() {
    let exp = default_experiment();
    let frame = exp.frame(1, 20.0).unwrap();
    let training = exp.training(400).unwrap();
    let y = exp.received(&frame, 400).unwrap();
    let model = elm_for(&y[..400], training);
    let soft = frame.tx.symbols.clone();
    for method in [RetrainMethod::TruncatedTls, RetrainMethod::Tls] {
        let (retrained, record) =
            retrain_data_aided(&model, training, &y, &soft, 0, method, 0.0).unwrap();
        assert_eq!(record.virtual_symbols, 0);
        assert_eq!(record.windows, 398);
        let ts = channel_windows(training, &y[..400], 2).unwrap();
        let direct = match method {
            RetrainMethod::TruncatedTls => model.train_tls_truncated(&ts).unwrap().0,
            RetrainMethod::Tls => match model.train_tls(&ts) {
                Ok(m) => m,
                Err(_) => model.train_ls(&ts).unwrap(),
            },
        };
        assert_eq!(retrained.output_weights(), direct.output_weights());
    }
}

#[test]
fn genie_virtual_symbols_match_true_training_of_equal_length() {
    let exp = default_experiment();
    let frame = exp.frame(2, 24.0).unwrap();
    let training = exp.training(400).unwrap();
    let y = exp.received(&frame, 400).unwrap();
    let base = elm_for(&y[..400], training);
    // Genie soft symbols: the transmitted data itself.
    let (virtual_model, _) = retrain_data_aided(
        &base,
        training,
        &y,
        &frame.tx.symbols,
        400,
        RetrainMethod::TruncatedTls,
        0.0,
    )
    .unwrap();

    // Reference: an 800-symbol true training sequence through the same channel.
    let long_training = exp.training(800).unwrap();
    let y_long = exp.received(&frame, 800).unwrap();
    let (reference, _) = ElmModel::new(5, 3, 150, 99)
        .unwrap()
        .train_tls_truncated(&channel_windows(long_training, &y_long[..800], 2).unwrap())
        .unwrap();

    // Held-out: the rest of the data, noiseless channel output as target.
    let held_x = &frame.tx.symbols[400..];
    let held_z = exp.channel.apply(&frame.tx.symbols)[400..].to_vec();
    let ts = channel_windows(held_x, &held_z, 2).unwrap();
    let err_virtual = rmse(
        &virtual_model.predict_batch(&ts.inputs).unwrap(),
        &ts.targets,
    )
    .unwrap();
    let err_reference = rmse(&reference.predict_batch(&ts.inputs).unwrap(), &ts.targets).unwrap();
    assert!(
        err_virtual <= 1.1 * err_reference,
        "virtual {err_virtual} vs true training {err_reference}"
    );
}

#[test]
fn iterations_improve_ber_on_the_led_channel() {
    let exp = default_experiment();
    let rx = exp.prepare("elm-turbo").unwrap();
    let p = run_frames(&rx, 20.0, 0, 100);
    let b: Vec<f64> = (1..=5).map(|i| p.iteration_ber(i).unwrap()).collect();
    assert!(b[4] <= b[0], "iteration BERs {b:?}");
    // Non-increasing within Monte Carlo noise: at most one inversion, by at most 10%.
    let inversions: Vec<usize> = (1..5).filter(|&i| b[i] > b[i - 1]).collect();
    assert!(inversions.len() <= 1, "iteration BERs {b:?}");
    for i in inversions {
        assert!(b[i] <= 1.1 * b[i - 1], "iteration BERs {b:?}");
    }
}

#[test]
fn traces_are_deterministic() {
    let exp = default_experiment();
    let frame = exp.frame(5, 20.0).unwrap();
    let training = exp.training(400).unwrap();
    let y = exp.received(&frame, 400).unwrap();
    let cfg = TurboConfig {
        data_aided: true,
        virtual_data_length: 400,
        training_length: 400,
        ..TurboConfig::default()
    };
    let run = || {
        let model = elm_for(&y[..400], training);
        run_turbo_with(
            TurboInput {
                stream: &y,
                training,
                truth: Some(&frame.tx.info),
            },
            &exp.link,
            &cfg,
            ChannelKnowledge::Elm(model),
        )
        .unwrap()
    };
    let a = run();
    let b = run();
    assert_eq!(a.info_bits, b.info_bits);
    assert_eq!(format!("{:?}", a.trace), format!("{:?}", b.trace));
    assert!(a.trace.retrain.is_some());
}

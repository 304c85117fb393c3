use ledrx::sim::{
    run_frames, run_point, run_sweep, to_csv, to_json, Experiment, ExperimentConfig, ReceiverKind,
    ReceiverSpec, Stopping, SweepResult,
};

fn one_receiver(kind: ReceiverKind, snr: f64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default_config();
    cfg.receivers = vec![ReceiverSpec::new(kind)];
    cfg.snr_db = vec![snr];
    cfg.stopping = Stopping {
        min_errors: 10,
        max_frames: 3,
        batch_frames: 2,
        min_frames: 0,
    };
    cfg
}

#[test]
fn zero_frames_give_empty_tallies() {
    let mut cfg = one_receiver(ReceiverKind::RlsPoly, 20.0);
    cfg.stopping.max_frames = 0;
    let exp = Experiment::new(cfg.clone()).unwrap();
    let rx = exp.prepare("rls-poly").unwrap();
    for p in [
        run_point(&rx, 20.0, &cfg.stopping),
        run_frames(&rx, 20.0, 0, 0),
    ] {
        assert_eq!((p.frames, p.bits, p.errors, p.frame_errors), (0, 0, 0, 0));
        assert_eq!(p.ber, 0.0);
        assert!(p.iteration_errors.is_empty());
    }
}

#[test]
fn single_receiver_single_snr_gives_one_row() {
    let cfg = one_receiver(ReceiverKind::ElmNoniter, 16.0);
    let result = run_sweep(&cfg).unwrap();
    assert_eq!(result.points.len(), 1);
    let csv = to_csv(&result);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(
        lines[0],
        "receiver,snr_db,ber,fer,bits,errors,iterations_mean"
    );
    assert!(lines[1].starts_with("elm-noniter,16.0,"));
}

#[test]
fn stopping_rule_stops_after_the_first_batch_with_enough_errors() {
    let mut cfg = one_receiver(ReceiverKind::UncodedHard, 6.0);
    cfg.stopping = Stopping {
        min_errors: 1,
        max_frames: 100,
        batch_frames: 3,
        min_frames: 0,
    };
    let exp = Experiment::new(cfg.clone()).unwrap();
    let rx = exp.prepare("uncoded-hard").unwrap();
    let p = run_point(&rx, 6.0, &cfg.stopping);
    assert_eq!(p.frames, 3);
    cfg.stopping.min_frames = 7;
    let p = run_point(&rx, 6.0, &cfg.stopping);
    assert_eq!(p.frames, 9);
}

#[test]
fn results_document_round_trips_and_echoes_the_config() {
    let mut cfg = one_receiver(ReceiverKind::GenieTurbo, 14.0);
    cfg.receivers.push(ReceiverSpec::new(ReceiverKind::RlsPoly));
    let result = run_sweep(&cfg).unwrap();
    let json = to_json(&result).unwrap();
    let back: SweepResult = serde_json::from_str(&json).unwrap();
    assert_eq!(back, result);
    assert_eq!(back.metadata.config, cfg);
    assert_eq!(back.metadata.master_seed, cfg.master_seed);
    assert_eq!(back.metadata.crate_version, env!("CARGO_PKG_VERSION"));
    for p in &result.points {
        assert_eq!(p.ber, p.errors as f64 / p.bits as f64);
        assert_eq!(p.bits, 1024 * p.frames);
    }
    let rls = result.point("rls-poly", 14.0).unwrap();
    assert!(rls.diagnostics.condition_log10_mean.is_some());
    let genie = result.point("genie-turbo", 14.0).unwrap();
    assert_eq!(genie.iteration_errors.len(), 5);
    assert_eq!(genie.diagnostics.covariance_mean.len(), 5);
}

#[test]
fn seed_override_changes_results() {
    let cfg = one_receiver(ReceiverKind::UncodedHard, 10.0);
    let mut other = cfg.clone();
    other.master_seed += 1;
    let a = run_sweep(&cfg).unwrap();
    let b = run_sweep(&other).unwrap();
    assert_ne!(a.points[0].errors, b.points[0].errors);
    assert_eq!(
        to_json(&a).unwrap(),
        to_json(&run_sweep(&cfg).unwrap()).unwrap()
    );
}

#[test]
fn unpreparable_receiver_is_reported_per_point() {
    let mut cfg = one_receiver(ReceiverKind::GenieTurbo, 14.0);
    cfg.snr_db = vec![10.0, 14.0];
    // The genie needs a memory-polynomial form of the channel, which a
    // curve with a constant offset does not have.
    cfg.channel = ledrx::channel::ChannelModel::Static(
        ledrx::channel::LedCurve::new(vec![0.1, 1.0], 0.2, 1.0).unwrap(),
    );
    let result = run_sweep(&cfg).unwrap();
    assert_eq!(result.points.len(), 2);
    for p in &result.points {
        assert!(p.error.is_some(), "{p:?}");
        assert_eq!(p.frames, 0);
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let mut cfg = one_receiver(ReceiverKind::RlsPoly, 10.0);
    cfg.snr_db.clear();
    assert!(Experiment::new(cfg).is_err());

    let mut cfg = one_receiver(ReceiverKind::ElmTurbo, 10.0);
    cfg.receivers
        .push(ReceiverSpec::new(ReceiverKind::ElmTurbo));
    assert!(Experiment::new(cfg).is_err(), "duplicate labels");

    assert!(ExperimentConfig::from_toml("name = 1").is_err());
    let mut text = ExperimentConfig::default_config().to_toml().unwrap();
    text.push_str("\nunknown_field = 3\n");
    assert!(ExperimentConfig::from_toml(&text).is_err());
}

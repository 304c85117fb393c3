use ledrx::channel::MemoryPolynomialModel;
use ledrx::coding::{LlrFrame, LlrKind, PamConstellation, LLR_CLAMP};
use ledrx::postdistort::{beliefs_from_llrs, genie_likelihood_params, siso_postdistort};
use ledrx::sim::{
    run_frames, run_point, Experiment, ExperimentConfig, ReceiverKind, ReceiverSpec, Stopping,
};
use proptest::prelude::*;

fn pam() -> PamConstellation {
    PamConstellation::new(3, 0.2, 1.0).unwrap()
}

/// Bit LLRs of a symbol posterior, by direct summation over labels.
fn posterior_llrs(post: &[f64], c: &PamConstellation) -> Vec<f64> {
    (0..c.bits_per_symbol())
        .map(|i| {
            let mut p = [0.0f64; 2];
            for (s, &q) in post.iter().enumerate() {
                p[c.label(s)[i] as usize] += q;
            }
            (p[0].ln() - p[1].ln()).clamp(-LLR_CLAMP, LLR_CLAMP)
        })
        .collect()
}

fn channel_strategy() -> impl Strategy<Value = MemoryPolynomialModel> {
    (
        prop::collection::vec(-1.0f64..3.0, 1..4),
        prop::collection::vec(0.0f64..0.3, 0..3),
    )
        .prop_map(|(coeffs, taps)| {
            let mut lags = vec![coeffs.clone()];
            for t in taps {
                lags.push(coeffs.iter().map(|a| a * t).collect());
            }
            MemoryPolynomialModel::new(lags).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn posteriors_are_normalized_and_extrinsic_decomposes(
        mp in channel_strategy(),
        idx in prop::collection::vec(0usize..8, 12..40),
        ap in prop::collection::vec(-6.0f64..6.0, 120),
        noise in prop::collection::vec(-0.2f64..0.2, 40),
        sigma2 in 1e-3f64..0.1,
    ) {
        let c = pam();
        let n = idx.len();
        let x: Vec<f64> = idx.iter().map(|&i| c.levels()[i]).collect();
        let y: Vec<f64> = mp.apply(&x).iter().zip(&noise).map(|(z, w)| z + w).collect();
        let ap = LlrFrame::new(ap[..3 * n].to_vec(), LlrKind::APriori);
        let beliefs = beliefs_from_llrs(&ap, &c).unwrap();
        let params = genie_likelihood_params(&mp, &beliefs, 0, n, sigma2, 2, &c).unwrap();
        let out = siso_postdistort(&y, 0, &ap, &params, &c).unwrap();
        prop_assert_eq!(out.extrinsic.kind, LlrKind::Extrinsic);
        for (s, post) in out.posteriors.iter().enumerate() {
            let total: f64 = post.iter().sum();
            prop_assert!((total - 1.0).abs() <= 1e-12, "sum {}", total);
            let llr = posterior_llrs(post, &c);
            for i in 0..3 {
                let e = out.extrinsic.values[3 * s + i];
                let a = ap.values[3 * s + i];
                // Saturated posteriors lose the a-priori part to clamping.
                if llr[i].abs() < LLR_CLAMP - 1.0 && e.abs() < LLR_CLAMP {
                    prop_assert!((e - (llr[i] - a)).abs() <= 1e-6, "{} vs {} - {}", e, llr[i], a);
                }
            }
        }
    }
}

fn small_config(receivers: Vec<ReceiverSpec>) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default_config();
    cfg.receivers = receivers;
    cfg.info_bits = 128;
    cfg.snr_db = vec![12.0];
    cfg
}

fn noniter() -> ReceiverSpec {
    let mut r = ReceiverSpec::new(ReceiverKind::ElmNoniter);
    r.hidden_nodes = Some(60);
    r.training_length = Some(300);
    r
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn tallies_are_conserved(seed in any::<u64>(), frames in 1usize..6, snr in 4.0f64..20.0) {
        let mut cfg = small_config(vec![noniter()]);
        cfg.master_seed = seed;
        let exp = Experiment::new(cfg).unwrap();
        let rx = exp.prepare("elm-noniter").unwrap();
        let p = run_frames(&rx, snr, 0, frames);
        let mut errors = 0;
        let mut frame_errors = 0;
        for f in 0..frames as u64 {
            let o = rx.run_frame(&exp.frame(f, snr).unwrap());
            errors += o.errors;
            frame_errors += u64::from(o.errors > 0);
        }
        prop_assert_eq!(p.frames, frames as u64);
        prop_assert_eq!(p.bits, 128 * frames as u64);
        prop_assert_eq!(p.errors, errors);
        prop_assert_eq!(p.frame_errors, frame_errors);
        prop_assert_eq!(p.ber, errors as f64 / p.bits as f64);
        prop_assert!((0.0..=1.0).contains(&p.ber));
    }

    #[test]
    fn same_seed_gives_identical_points(seed in any::<u64>(), snr in 6.0f64..20.0) {
        let mut cfg = small_config(vec![noniter(), ReceiverSpec::new(ReceiverKind::GenieTurbo)]);
        cfg.master_seed = seed;
        let stopping = Stopping { min_errors: 20, max_frames: 6, batch_frames: 2, min_frames: 0 };
        let exp = Experiment::new(cfg.clone()).unwrap();
        let again = Experiment::new(cfg).unwrap();
        for label in ["elm-noniter", "genie-turbo"] {
            let a = run_point(&exp.prepare(label).unwrap(), snr, &stopping);
            let b = run_point(&again.prepare(label).unwrap(), snr, &stopping);
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn receivers_see_identical_data_samples(seed in any::<u64>(), frame in 0u64..1000, snr in 0.0f64..30.0) {
        let mut cfg = small_config(vec![noniter()]);
        cfg.master_seed = seed;
        let exp = Experiment::new(cfg).unwrap();
        let f = exp.frame(frame, snr).unwrap();
        // Any training suffix at least as long as the channel memory leaves
        // the data part of the stream unchanged.
        let long = exp.received(&f, 300).unwrap();
        let short = exp.received(&f, 40).unwrap();
        prop_assert_eq!(&long[300..], &short[40..]);
        let bare = exp.received(&f, 0).unwrap();
        prop_assert_eq!(bare.len(), exp.link.data_symbols());
    }
}

#[test]
fn training_suffix_does_not_depend_on_the_receiver_set() {
    let mut wide = ExperimentConfig::default_config();
    wide.receivers.truncate(3);
    let mut narrow = wide.clone();
    let mut long = ReceiverSpec::new(ReceiverKind::ElmTurbo);
    long.label = Some("long".into());
    long.training_length = Some(2000);
    wide.receivers.push(long);
    let a = Experiment::new(wide).unwrap();
    narrow.receivers.truncate(1);
    let b = Experiment::new(narrow).unwrap();
    assert_eq!(a.training(800).unwrap(), b.training(800).unwrap());
    let fa = a.frame(7, 18.0).unwrap();
    let fb = b.frame(7, 18.0).unwrap();
    assert_eq!(a.received(&fa, 800).unwrap(), b.received(&fb, 800).unwrap());
}

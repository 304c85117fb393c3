//! The nine acceptance criteria as runnable checks. The integration suite
//! and `ledrx verify` share these.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::channel::{ChannelModel, HammersteinModel, MemoryPolynomialModel};
use crate::coding::{
    bcjr_decode, log_add, ConvCode, LlrFrame, LlrKind, PamConstellation, LLR_CLAMP,
};
use crate::error::Result;
use crate::numerics::{self, RealMatrix};
use crate::postdistort::{
    beliefs_from_llrs, genie_likelihood_params, siso_postdistort, SymbolBelief,
};
use crate::sim::{
    run_frames, run_sweep, to_json, Experiment, ExperimentConfig, PointResult, ReceiverKind,
    ReceiverSpec,
};
use crate::verification::oracles::{awgn_pam_posterior, exhaustive_map, pam_gray_ber};

pub const CRITERIA: usize = 9;

/// Frame budgets. `Full` meets the stated minimums; `Quick` is for smoke runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Effort {
    Full,
    Quick,
}

impl Effort {
    fn frames(self, full: usize) -> usize {
        match self {
            Effort::Full => full,
            Effort::Quick => (full / 10).max(4),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionReport {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    /// Passed only because every compared BER is zero.
    pub vacuous: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CriterionReport {
    pub fn line(&self) -> String {
        let status = match (self.passed, self.vacuous) {
            (true, false) => "PASS",
            (true, true) => "PASS (vacuous)",
            (false, _) => "FAIL",
        };
        format!(
            "criterion {} [{}] {status}: {} ({:.1}s)",
            self.id, self.name, self.detail, self.seconds
        )
    }
}

pub fn criterion_name(id: usize) -> &'static str {
    match id {
        1 => "linear algebra",
        2 => "bcjr oracle",
        3 => "awgn calibration",
        4 => "genie demapper",
        5 => "rls vs elm",
        6 => "turbo convergence",
        7 => "receiver ordering",
        8 => "data-aided training",
        9 => "determinism",
        _ => "unknown",
    }
}

pub fn run_criterion(id: usize, effort: Effort) -> CriterionReport {
    let start = Instant::now();
    let outcome = match id {
        1 => linear_algebra(),
        2 => bcjr_oracle(),
        3 => awgn_calibration(effort),
        4 => genie_demapper(),
        5 => rls_vs_elm(effort),
        6 => turbo_convergence(effort),
        7 => receiver_ordering(effort),
        8 => data_aided(effort),
        9 => determinism(effort),
        _ => Ok(Check::fail(format!("no criterion {id}"))),
    };
    let check = outcome.unwrap_or_else(|e| Check::fail(format!("error: {e}")));
    CriterionReport {
        id,
        name: criterion_name(id),
        passed: check.passed,
        vacuous: check.vacuous,
        detail: check.detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

struct Check {
    passed: bool,
    vacuous: bool,
    detail: String,
}

impl Check {
    fn new(passed: bool, detail: String) -> Self {
        Self {
            passed,
            vacuous: false,
            detail,
        }
    }

    fn fail(detail: String) -> Self {
        Self::new(false, detail)
    }
}

/// The Hammerstein experiment with only `receivers` and the given SNRs.
pub fn trend_config(receivers: Vec<ReceiverSpec>, snr_db: Vec<f64>) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default_config();
    cfg.receivers = receivers;
    cfg.snr_db = snr_db;
    cfg
}

fn elm_turbo(label: &str, training: usize, hidden: usize) -> ReceiverSpec {
    let mut r = ReceiverSpec::new(ReceiverKind::ElmTurbo);
    r.label = Some(label.into());
    r.training_length = Some(training);
    r.hidden_nodes = Some(hidden);
    r
}

fn point(cfg: &ExperimentConfig, label: &str, snr: f64, frames: usize) -> Result<PointResult> {
    let exp = Experiment::new(cfg.clone())?;
    let rx = exp.prepare(label)?;
    Ok(run_frames(&rx, snr, 0, frames))
}

/// `a <= b` up to three standard errors of the difference.
fn not_worse(a: &PointResult, b: &PointResult) -> bool {
    let se = (a.ber_std_error().powi(2) + b.ber_std_error().powi(2)).sqrt();
    a.ber <= b.ber + 3.0 * se
}

fn rel(num: f64, den: f64) -> f64 {
    num / den.max(f64::MIN_POSITIVE)
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> RealMatrix {
    let data = (0..rows * cols)
        .map(|_| rng.sample(StandardNormal))
        .collect();
    RealMatrix::from_row_major(rows, cols, data).expect("shape matches data")
}

fn linear_algebra() -> Result<Check> {
    const TOL: f64 = 1e-8;
    let mut rng = ChaCha8Rng::seed_from_u64(0x11);
    let mut worst = 0.0f64;
    let mut what = String::new();
    let mut track = |v: f64, label: String| {
        if v > worst || what.is_empty() {
            worst = worst.max(v);
            what = label;
        }
    };
    let shapes = [(200, 200), (200, 60), (60, 200), (120, 40), (37, 37)];
    for &(r, c) in &shapes {
        let a = gaussian_matrix(&mut rng, r, c);
        let p = numerics::pinv_default(&a)?;
        let ap = a.matmul(&p)?;
        let pa = p.matmul(&a)?;
        let na = a.frobenius_norm();
        let np = p.frobenius_norm();
        track(
            rel(ap.matmul(&a)?.sub(&a)?.frobenius_norm(), na),
            format!("A A+ A = A ({r}x{c})"),
        );
        track(
            rel(pa.matmul(&p)?.sub(&p)?.frobenius_norm(), np),
            format!("A+ A A+ = A+ ({r}x{c})"),
        );
        track(
            rel(
                ap.transpose().sub(&ap)?.frobenius_norm(),
                ap.frobenius_norm(),
            ),
            format!("(A A+)^T ({r}x{c})"),
        );
        track(
            rel(
                pa.transpose().sub(&pa)?.frobenius_norm(),
                pa.frobenius_norm(),
            ),
            format!("(A+ A)^T ({r}x{c})"),
        );
    }
    // Rank-deficient case: product of thin factors.
    let a = gaussian_matrix(&mut rng, 150, 20).matmul(&gaussian_matrix(&mut rng, 20, 100))?;
    let p = numerics::pinv_default(&a)?;
    track(
        rel(
            a.matmul(&p)?.matmul(&a)?.sub(&a)?.frobenius_norm(),
            a.frobenius_norm(),
        ),
        "A A+ A = A (rank 20)".into(),
    );

    for &(r, c, q) in &[(200, 50, 1), (200, 120, 3), (80, 10, 2)] {
        let a = gaussian_matrix(&mut rng, r, c);
        let y = gaussian_matrix(&mut rng, r, q);
        let beta = numerics::solve_ls(&a, &y)?;
        let resid = y.sub(&a.matmul(&beta)?)?;
        let ortho = a.transpose().matmul(&resid)?.frobenius_norm();
        track(
            rel(ortho, a.frobenius_norm() * y.frobenius_norm()),
            format!("A^T r = 0 ({r}x{c}, {q} rhs)"),
        );

        let beta0 = gaussian_matrix(&mut rng, c, q);
        let consistent = a.matmul(&beta0)?;
        let ls = numerics::solve_ls(&a, &consistent)?;
        let tls = numerics::tls_solve(&a, &consistent)?;
        track(
            rel(tls.sub(&ls)?.frobenius_norm(), ls.frobenius_norm()),
            format!("TLS = LS ({r}x{c}, {q} rhs)"),
        );
        track(
            rel(ls.sub(&beta0)?.frobenius_norm(), beta0.frobenius_norm()),
            format!("LS = beta ({r}x{c}, {q} rhs)"),
        );
    }
    Ok(Check::new(
        worst <= TOL,
        format!("worst relative error {worst:.2e} at {what} (tolerance {TOL:.0e})"),
    ))
}

fn bcjr_oracle() -> Result<Check> {
    const TOL: f64 = 1e-6;
    const FRAMES: usize = 60;
    let code = ConvCode::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x22);
    let mut worst = 0.0f64;
    let mut compared = 0usize;
    for f in 0..FRAMES {
        let k = [4, 8, 12, 16][f % 4];
        // Channel LLRs of a BPSK frame at a random SNR, so signs agree with a codeword.
        let info: Vec<u8> = (0..k).map(|_| rng.gen_range(0..2)).collect();
        let cw = code.encode(&info);
        let sigma2: f64 = rng.gen_range(0.3..1.5);
        let llrs: Vec<f64> = cw
            .iter()
            .map(|&b| {
                let s = if b == 0 { 1.0 } else { -1.0 };
                let w: f64 = rng.sample(StandardNormal);
                2.0 * (s + sigma2.sqrt() * w) / sigma2
            })
            .collect();
        let out = bcjr_decode(&LlrFrame::new(llrs.clone(), LlrKind::APriori), &code)?;
        let oracle = exhaustive_map(&llrs, &code);
        for (a, b) in out.info_app.values.iter().zip(&oracle.info_app) {
            worst = worst.max((a - b).abs());
            compared += 1;
        }
        for (j, (a, b)) in out
            .coded_app
            .values
            .iter()
            .zip(&oracle.coded_app)
            .enumerate()
        {
            worst = worst.max((a - b).abs());
            compared += 1;
            // Extrinsic = APP minus channel LLR wherever the APP is not saturated.
            if b.abs() < LLR_CLAMP - 1.0 {
                let e = out.coded_extrinsic.values[j];
                worst = worst.max((e - (b - llrs[j])).abs());
                compared += 1;
            }
        }
    }
    Ok(Check::new(
        worst <= TOL,
        format!("{FRAMES} frames, {compared} LLRs, max |error| {worst:.2e} (tolerance {TOL:.0e})"),
    ))
}

fn awgn_calibration(effort: Effort) -> Result<Check> {
    const SNRS: [f64; 3] = [16.0, 20.0, 24.0];
    let mut cfg = ExperimentConfig::default_config();
    cfg.name = "awgn-calibration".into();
    cfg.channel = ChannelModel::Hammerstein(HammersteinModel::new(vec![1.0], vec![])?);
    cfg.receivers = vec![ReceiverSpec::new(ReceiverKind::UncodedHard)];
    cfg.snr_db = SNRS.to_vec();
    let exp = Experiment::new(cfg)?;
    let symbols_per_frame = exp.link.data_symbols();
    let frames = effort.frames(100_000usize.div_ceil(symbols_per_frame));
    let rx = exp.prepare("uncoded-hard")?;
    let c = &exp.constellation;
    let mut passed = true;
    let mut parts = Vec::new();
    for &snr in &SNRS {
        let p = run_frames(&rx, snr, 0, frames);
        let mut oracle = 0.0;
        for f in 0..frames as u64 {
            oracle += pam_gray_ber(c, exp.frame(f, snr)?.noise_variance);
        }
        oracle /= frames as f64;
        let sd = (oracle * (1.0 - oracle) / p.bits as f64).sqrt();
        let z = (p.ber - oracle) / sd;
        passed &= z.abs() <= 3.0 && p.failures == 0;
        parts.push(format!(
            "{snr} dB: {:.4e} vs {oracle:.4e} ({z:+.2} sd)",
            p.ber
        ));
    }
    Ok(Check::new(
        passed,
        format!(
            "{} symbols per SNR; {}",
            frames * symbols_per_frame,
            parts.join(", ")
        ),
    ))
}

fn genie_demapper() -> Result<Check> {
    const TOL: f64 = 1e-6;
    const N: usize = 2000;
    let c = PamConstellation::new(3, 0.2, 1.0)?;
    let p = c.bits_per_symbol();
    let mut rng = ChaCha8Rng::seed_from_u64(0x44);
    let mut worst = 0.0f64;
    // A linear and a nonlinear memoryless channel.
    for coeffs in [vec![1.0], vec![-0.6, 3.6, -2.0]] {
        let mp = MemoryPolynomialModel::new(vec![coeffs])?;
        let outputs: Vec<f64> = c.levels().iter().map(|&a| mp.lag_response(0, a)).collect();
        for &sigma2 in &[0.002f64, 0.01, 0.05] {
            let idx: Vec<usize> = (0..N).map(|_| rng.gen_range(0..c.size())).collect();
            let x: Vec<f64> = idx.iter().map(|&i| c.levels()[i]).collect();
            let y: Vec<f64> = mp
                .apply(&x)
                .iter()
                .map(|z| z + sigma2.sqrt() * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let ap = LlrFrame::new(
                (0..N * p).map(|_| rng.gen_range(-3.0..3.0)).collect(),
                LlrKind::APriori,
            );
            let beliefs = beliefs_from_llrs(&ap, &c)?;
            let params = genie_likelihood_params(&mp, &beliefs, 0, N, sigma2, 0, &c)?;
            let out = siso_postdistort(&y, 0, &ap, &params, &c)?;
            for n in 0..N {
                let SymbolBelief::Soft(prior) = &beliefs[n] else {
                    unreachable!("a-priori beliefs are soft")
                };
                let post = awgn_pam_posterior(y[n], &outputs, prior, sigma2);
                for (a, b) in out.posteriors[n].iter().zip(&post) {
                    worst = worst.max((a - b).abs());
                }
                // Extrinsic bit LLRs by direct marginalization over the other bits.
                let lap = &ap.values[n * p..(n + 1) * p];
                for i in 0..p {
                    let mut num = [f64::NEG_INFINITY; 2];
                    for (s, &g) in outputs.iter().enumerate() {
                        let label = c.label(s);
                        let mut w = -(y[n] - g).powi(2) / (2.0 * sigma2);
                        for (j, &b) in label.iter().enumerate() {
                            if j != i {
                                w += if b == 0 { 0.5 * lap[j] } else { -0.5 * lap[j] };
                            }
                        }
                        let k = label[i] as usize;
                        num[k] = log_add(num[k], w);
                    }
                    let expected = (num[0] - num[1]).clamp(-LLR_CLAMP, LLR_CLAMP);
                    worst = worst.max((out.extrinsic.values[n * p + i] - expected).abs());
                }
            }
        }
    }
    Ok(Check::new(
        worst <= TOL,
        format!("memoryless linear and LED channels, 3 noise levels: max |error| {worst:.2e} (tolerance {TOL:.0e})"),
    ))
}

/// Top SNR of the default grid.
fn top_snr() -> f64 {
    ExperimentConfig::default_config()
        .snr_db
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

fn rls_vs_elm(effort: Effort) -> Result<Check> {
    let snr = top_snr();
    let mut rls = ReceiverSpec::new(ReceiverKind::RlsPoly);
    rls.training_length = Some(800);
    let mut elm = ReceiverSpec::new(ReceiverKind::ElmNoniter);
    elm.training_length = Some(800);
    elm.hidden_nodes = Some(100);
    let cfg = trend_config(vec![rls, elm], vec![snr]);
    let frames = effort.frames(1_000_000usize.div_ceil(cfg.info_bits));
    let r = point(&cfg, "rls-poly", snr, frames)?;
    let e = point(&cfg, "elm-noniter", snr, frames)?;
    let cond = r.diagnostics.condition_log10_mean.unwrap_or(f64::NAN);
    let ber_ok = e.ber <= 0.1 * r.ber;
    let cond_ok = cond > 10.0;
    let mut check = Check::new(
        ber_ok && cond_ok && r.failures == 0 && e.failures == 0,
        format!(
            "{snr} dB, {} bits: elm {:.3e} vs rls {:.3e}; log10 cond(R^T R) {cond:.2}",
            e.bits, e.ber, r.ber
        ),
    );
    check.vacuous = check.passed && r.ber == 0.0;
    Ok(check)
}

/// SNR at which the iteration trend is checked.
pub const CONVERGENCE_SNR: f64 = 20.0;

fn turbo_convergence(effort: Effort) -> Result<Check> {
    let cfg = trend_config(
        vec![ReceiverSpec::new(ReceiverKind::ElmTurbo)],
        vec![CONVERGENCE_SNR],
    );
    let p = point(&cfg, "elm-turbo", CONVERGENCE_SNR, effort.frames(200))?;
    let b: Vec<f64> = (1..=5)
        .map(|i| p.iteration_ber(i).unwrap_or(f64::NAN))
        .collect();
    let gain_ok = b[4] <= 0.1 * b[0];
    let settled = (b[4] - b[3]).abs() <= 0.5 * b[3];
    let mut check = Check::new(
        gain_ok && settled && p.failures == 0,
        format!(
            "{CONVERGENCE_SNR} dB, {} frames: BER by iteration {}",
            p.frames,
            b.iter()
                .map(|v| format!("{v:.2e}"))
                .collect::<Vec<_>>()
                .join(" ")
        ),
    );
    check.vacuous = check.passed && b[0] == 0.0;
    Ok(check)
}

/// SNRs at or above the threshold where the ordering is checked.
pub const ORDERING_SNRS: [f64; 4] = [18.0, 20.0, 22.0, 24.0];

fn receiver_ordering(effort: Effort) -> Result<Check> {
    let mut noniter = ReceiverSpec::new(ReceiverKind::ElmNoniter);
    noniter.hidden_nodes = Some(100);
    let chain = [
        "genie-turbo",
        "elm-turbo-1200-300",
        "elm-turbo",
        "elm-noniter",
    ];
    let cfg = trend_config(
        vec![
            ReceiverSpec::new(ReceiverKind::GenieTurbo),
            elm_turbo("elm-turbo-1200-300", 1200, 300),
            elm_turbo("elm-turbo", 800, 150),
            noniter,
        ],
        ORDERING_SNRS.to_vec(),
    );
    let frames = effort.frames(200);
    let exp = Experiment::new(cfg)?;
    let receivers = chain
        .iter()
        .map(|l| exp.prepare(l))
        .collect::<Result<Vec<_>>>()?;
    let mut passed = true;
    let mut all_zero = true;
    let mut parts = Vec::new();
    for &snr in &ORDERING_SNRS {
        let pts: Vec<PointResult> = receivers
            .iter()
            .map(|rx| run_frames(rx, snr, 0, frames))
            .collect();
        let ok =
            pts.windows(2).all(|w| not_worse(&w[0], &w[1])) && pts.iter().all(|p| p.failures == 0);
        passed &= ok;
        all_zero &= pts.iter().all(|p| p.errors == 0);
        parts.push(format!(
            "{snr} dB {}: {}",
            if ok { "ok" } else { "violated" },
            pts.iter()
                .map(|p| format!("{:.2e}", p.ber))
                .collect::<Vec<_>>()
                .join(" <= ")
        ));
    }
    let mut check = Check::new(
        passed,
        format!(
            "{frames} frames, {}; {}",
            chain.join(" <= "),
            parts.join("; ")
        ),
    );
    check.vacuous = passed && all_zero;
    Ok(check)
}

/// The two highest SNRs of the data-aided comparison.
pub const DATA_AIDED_SNRS: [f64; 2] = [22.0, 24.0];

fn data_aided(effort: Effort) -> Result<Check> {
    let mut da = ReceiverSpec::new(ReceiverKind::ElmTurboDataAided);
    da.label = Some("elm-turbo-data-aided-400".into());
    da.training_length = Some(400);
    da.virtual_length = 400;
    let cfg = trend_config(
        vec![
            da,
            elm_turbo("elm-turbo", 800, 150),
            elm_turbo("elm-turbo-400", 400, 150),
        ],
        DATA_AIDED_SNRS.to_vec(),
    );
    let frames = effort.frames(500);
    let exp = Experiment::new(cfg)?;
    let rx_da = exp.prepare("elm-turbo-data-aided-400")?;
    let rx_800 = exp.prepare("elm-turbo")?;
    let rx_400 = exp.prepare("elm-turbo-400")?;
    let mut passed = true;
    let mut all_zero = true;
    let mut parts = Vec::new();
    for &snr in &DATA_AIDED_SNRS {
        let d = run_frames(&rx_da, snr, 0, frames);
        let a = run_frames(&rx_800, snr, 0, frames);
        let b = run_frames(&rx_400, snr, 0, frames);
        let near_800 = d.ber <= 2.0 * a.ber;
        let beats_400 = d.ber <= 0.5 * b.ber;
        passed &= near_800 && beats_400 && d.failures + a.failures + b.failures == 0;
        all_zero &= d.errors + a.errors + b.errors == 0;
        parts.push(format!(
            "{snr} dB: data-aided {:.2e}, 800 {:.2e}, 400 {:.2e}{}{}",
            d.ber,
            a.ber,
            b.ber,
            if near_800 { "" } else { " [above 2x 800]" },
            if beats_400 {
                ""
            } else {
                " [not below 0.5x 400]"
            },
        ));
    }
    let mut check = Check::new(passed, format!("{frames} frames; {}", parts.join("; ")));
    check.vacuous = passed && all_zero;
    Ok(check)
}

fn determinism(effort: Effort) -> Result<Check> {
    let mut noniter = ReceiverSpec::new(ReceiverKind::ElmNoniter);
    noniter.hidden_nodes = Some(100);
    let mut da = ReceiverSpec::new(ReceiverKind::ElmTurboDataAided);
    da.training_length = Some(400);
    da.virtual_length = 400;
    let mut cfg = trend_config(
        vec![
            ReceiverSpec::new(ReceiverKind::RlsPoly),
            noniter,
            ReceiverSpec::new(ReceiverKind::ElmTurbo),
            da,
            ReceiverSpec::new(ReceiverKind::GenieTurbo),
        ],
        vec![14.0, 20.0],
    );
    cfg.stopping.max_frames = effort.frames(12);
    cfg.stopping.batch_frames = 5;
    cfg.stopping.min_errors = 50;
    let run_with = |threads: usize| -> Result<String> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| crate::Error::Io(e.to_string()))?;
        pool.install(|| to_json(&run_sweep(&cfg)?))
    };
    let one = run_with(1)?;
    let again = run_with(1)?;
    let four = run_with(4)?;
    let passed = one == again && one == four;
    Ok(Check::new(
        passed,
        format!(
            "{} receivers x {} SNRs, {} byte document; rerun {}, 1 vs 4 threads {}",
            cfg.receivers.len(),
            cfg.snr_db.len(),
            one.len(),
            if one == again { "identical" } else { "differs" },
            if one == four { "identical" } else { "differs" },
        ),
    ))
}

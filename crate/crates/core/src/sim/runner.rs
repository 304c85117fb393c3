use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{noise_variance_for, ChannelModel, MemoryPolynomialModel};
use crate::coding::{bcjr_decode, PamConstellation};
use crate::elm::{ElmModel, LsProjector};
use crate::error::{Error, Result};
use crate::link::{LinkLayout, TxFrame};
use crate::postdistort::{
    channel_window_inputs, channel_windows, elm_pd_train, gaussian_demap, PolyPostDistorter,
    RLS_DEFAULT_DELTA,
};
use crate::rng::{derive_seed, derived_stream, purpose};
use crate::sim::config::{ExperimentConfig, ReceiverKind, ResolvedReceiver, Stopping};
use crate::turbo::{run_turbo_with, ChannelKnowledge, RetrainSolver, TurboInput};

/// Demapper variance floor for the non-iterative receivers, whose training
/// MSE can be tiny at high SNR.
const DEMAP_VARIANCE_FLOOR: f64 = 1e-9;

/// Everything shared by all receivers of one experiment: link layout,
/// channel and the fixed training preamble.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub constellation: PamConstellation,
    pub link: LinkLayout,
    pub channel: ChannelModel,
    /// Longest training sequence; a receiver with training length `T` uses
    /// its last `T` symbols, so every training sequence ends right before
    /// the data.
    pub preamble: Vec<f64>,
}

/// One transmitted frame at one SNR, identical for every receiver.
#[derive(Debug, Clone)]
pub struct Frame {
    pub index: u64,
    pub tx: TxFrame,
    pub noise_variance: f64,
    /// Scaled noise for the data part.
    pub data_noise: Vec<f64>,
    /// Scaled noise for the full preamble.
    pub training_noise: Vec<f64>,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let constellation = config.constellation.build()?;
        let link = LinkLayout::new(
            config.code,
            constellation.clone(),
            config.info_bits,
            derive_seed(config.master_seed, &[purpose::INTERLEAVER]),
        )?;
        let mut rng = derived_stream(config.master_seed, &[purpose::TRAINING_SYMBOLS]);
        // Drawn backwards from the data, so a suffix does not depend on how
        // long the longest training sequence is.
        let mut preamble: Vec<f64> = (0..config.preamble_length())
            .map(|_| constellation.levels()[rng.gen_range(0..constellation.size())])
            .collect();
        preamble.reverse();
        Ok(Self {
            channel: config.channel.clone(),
            config,
            constellation,
            link,
            preamble,
        })
    }

    /// Frame `index` at `snr_db`. Information bits and the unit-variance
    /// noise shapes depend only on the frame index; the SNR scales the
    /// noise. The noise variance follows from the data part of the output.
    pub fn frame(&self, index: u64, snr_db: f64) -> Result<Frame> {
        let master = self.config.master_seed;
        let mut bits_rng = derived_stream(master, &[purpose::INFO_BITS, index]);
        let info: Vec<u8> = (0..self.config.info_bits)
            .map(|_| bits_rng.gen_range(0..2))
            .collect();
        let tx = self.link.transmit(&info)?;
        let mut x = self.preamble.clone();
        x.extend_from_slice(&tx.symbols);
        let z = self.channel.apply(&x);
        let noise_variance = noise_variance_for(&z[self.preamble.len()..], snr_db)?;
        let sigma = noise_variance.sqrt();
        let draw = |tag: u64, n: usize| -> Vec<f64> {
            let mut rng = derived_stream(master, &[tag, index]);
            (0..n)
                .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
                .collect()
        };
        let mut training_noise = draw(purpose::TRAINING_NOISE, self.preamble.len());
        training_noise.reverse();
        Ok(Frame {
            index,
            data_noise: draw(purpose::DATA_NOISE, tx.symbols.len()),
            training_noise,
            noise_variance,
            tx,
        })
    }

    /// Training symbols of length `t` (suffix of the preamble).
    pub fn training(&self, t: usize) -> Result<&[f64]> {
        self.preamble
            .len()
            .checked_sub(t)
            .map(|start| &self.preamble[start..])
            .ok_or_else(|| Error::Config(format!("training length {t} exceeds the preamble")))
    }

    /// Received stream `[training; data]` for a training length `t`: the
    /// suffix and the data pass through the channel from a cold start.
    pub fn received(&self, frame: &Frame, t: usize) -> Result<Vec<f64>> {
        let training = self.training(t)?;
        let mut x = training.to_vec();
        x.extend_from_slice(&frame.tx.symbols);
        let noise = frame.training_noise[frame.training_noise.len() - t..]
            .iter()
            .chain(&frame.data_noise);
        Ok(self
            .channel
            .apply(&x)
            .iter()
            .zip(noise)
            .map(|(z, w)| z + w)
            .collect())
    }

    pub fn prepare(&self, label: &str) -> Result<PreparedReceiver<'_>> {
        PreparedReceiver::new(self, self.config.receiver(label)?)
    }
}

/// Stable 64-bit FNV-1a of a receiver label, used to key its ELM seed.
fn label_key(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Per-frame result of one receiver.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameOutcome {
    pub bits: u64,
    pub errors: u64,
    /// Errors after each iteration (one entry for non-iterative receivers).
    pub iteration_errors: Vec<u64>,
    pub iterations: usize,
    pub failure: Option<String>,
    pub condition_number: Option<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub retrain_fallback: bool,
}

/// A receiver with its frame-independent state precomputed: the training
/// sequence, the ELM hidden layer and, where the ELM inputs are the known
/// training symbols, the pseudo-inverse of its hidden matrix.
#[derive(Debug, Clone)]
pub struct PreparedReceiver<'a> {
    pub experiment: &'a Experiment,
    pub spec: ResolvedReceiver,
    pub elm_seed: u64,
    channel_elm: Option<(ElmModel, LsProjector)>,
    genie: Option<MemoryPolynomialModel>,
}

impl<'a> PreparedReceiver<'a> {
    pub fn new(experiment: &'a Experiment, spec: ResolvedReceiver) -> Result<Self> {
        let elm_seed = derive_seed(
            experiment.config.master_seed,
            &[purpose::ELM_HIDDEN, label_key(&spec.label)],
        );
        let mut channel_elm = None;
        let mut genie = None;
        match spec.kind {
            ReceiverKind::ElmTurbo | ReceiverKind::ElmTurboDataAided => {
                let m = spec.window;
                let base = ElmModel::new(2 * m + 1, m + 1, spec.hidden_nodes, elm_seed)?;
                let training = experiment.training(spec.training_length)?;
                let inputs = channel_window_inputs(training, m, training.len() - m);
                let projector = base.ridge_projector(&inputs, spec.turbo.ridge)?;
                channel_elm = Some((base, projector));
            }
            ReceiverKind::GenieTurbo => genie = Some(experiment.channel.as_memory_polynomial()?),
            _ => {}
        }
        Ok(Self {
            experiment,
            spec,
            elm_seed,
            channel_elm,
            genie,
        })
    }

    pub fn label(&self) -> &str {
        &self.spec.label
    }

    /// Runs the receiver on one frame. Receiver errors do not abort: the
    /// frame falls back to all-zero decisions and the failure is recorded.
    pub fn run_frame(&self, frame: &Frame) -> FrameOutcome {
        match self.try_run_frame(frame) {
            Ok(o) => o,
            Err(e) => {
                let truth = self.truth_bits(frame);
                let errors = truth.iter().filter(|&&b| b != 0).count() as u64;
                FrameOutcome {
                    bits: truth.len() as u64,
                    errors,
                    iteration_errors: vec![errors; self.nominal_iterations()],
                    iterations: 0,
                    failure: Some(e.to_string()),
                    ..Default::default()
                }
            }
        }
    }

    fn nominal_iterations(&self) -> usize {
        if self.spec.kind.is_turbo() {
            self.spec.turbo.max_iterations
        } else {
            1
        }
    }

    fn truth_bits<'f>(&self, frame: &'f Frame) -> &'f [u8] {
        if self.spec.kind == ReceiverKind::UncodedHard {
            &frame.tx.bits[..self.experiment.link.coded_len()]
        } else {
            &frame.tx.info
        }
    }

    fn try_run_frame(&self, frame: &Frame) -> Result<FrameOutcome> {
        let exp = self.experiment;
        let link = &exp.link;
        let c = &exp.constellation;
        // Receivers without training still get the full preamble, so the
        // data samples match every other receiver's exactly.
        let t = if self.spec.kind.needs_training() {
            self.spec.training_length
        } else {
            exp.preamble.len()
        };
        let y = exp.received(frame, t)?;
        let training = exp.training(t)?;
        let (y_train, y_data) = y.split_at(t);
        let count = |decisions: &[u8], truth: &[u8]| -> u64 {
            decisions.iter().zip(truth).filter(|(a, b)| a != b).count() as u64
        };
        let info = &frame.tx.info;
        let bits = info.len() as u64;

        match self.spec.kind {
            ReceiverKind::UncodedHard => {
                let truth = self.truth_bits(frame);
                let decided = c.demap_hard(y_data);
                let errors = count(&decided[..truth.len()], truth);
                Ok(FrameOutcome {
                    bits: truth.len() as u64,
                    errors,
                    iteration_errors: vec![errors],
                    iterations: 1,
                    ..Default::default()
                })
            }
            ReceiverKind::RlsPoly | ReceiverKind::ElmNoniter => {
                let (estimates, variance, condition) = if self.spec.kind == ReceiverKind::RlsPoly {
                    let pd = PolyPostDistorter::train_rls(
                        y_train,
                        training,
                        self.spec.poly_order,
                        self.spec.poly_memory,
                        self.spec.forgetting,
                        RLS_DEFAULT_DELTA,
                    )?;
                    let est = pd.apply(&y);
                    let mse = est[..t]
                        .iter()
                        .zip(training)
                        .map(|(a, b)| (a - b).powi(2))
                        .sum::<f64>()
                        / t as f64;
                    (est, mse, pd.condition_number)
                } else {
                    let pd = elm_pd_train(
                        y_train,
                        training,
                        self.spec.window,
                        self.spec.hidden_nodes,
                        self.elm_seed,
                    )?;
                    (pd.estimate(&y)?, pd.training_mse, None)
                };
                if !variance.is_finite() || estimates.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("post-distorter output"));
                }
                let llrs =
                    gaussian_demap(&estimates[t..], variance.max(DEMAP_VARIANCE_FLOOR), None, c)?;
                let dec = bcjr_decode(&link.to_decoder(&llrs)?, &link.code)?;
                let errors = count(&dec.info_decisions(), info);
                Ok(FrameOutcome {
                    bits,
                    errors,
                    iteration_errors: vec![errors],
                    iterations: 1,
                    condition_number: condition,
                    ..Default::default()
                })
            }
            ReceiverKind::ElmTurbo | ReceiverKind::ElmTurboDataAided | ReceiverKind::GenieTurbo => {
                let input = TurboInput {
                    stream: &y,
                    training,
                    truth: Some(info),
                };
                let cfg = &self.spec.turbo;
                let outcome = match (&self.channel_elm, &self.genie) {
                    (_, Some(mp)) => run_turbo_with(
                        input,
                        link,
                        cfg,
                        ChannelKnowledge::Genie {
                            channel: mp,
                            noise_variance: frame.noise_variance,
                        },
                    )?,
                    (Some((base, projector)), None) => {
                        let ts = channel_windows(training, y_train, self.spec.window)?;
                        let model = base.train_with_projector(projector, &ts.targets)?;
                        run_turbo_with(input, link, cfg, ChannelKnowledge::Elm(model))?
                    }
                    (None, None) => {
                        unreachable!("turbo receivers are prepared with a channel model")
                    }
                };
                let errors = count(&outcome.info_bits, info);
                let mut iteration_errors: Vec<u64> = outcome
                    .trace
                    .iterations
                    .iter()
                    .map(|r| r.bit_errors.unwrap_or(0) as u64)
                    .collect();
                let iterations = iteration_errors.len();
                // Early stopping freezes the decisions for the remaining iterations.
                iteration_errors.resize(cfg.max_iterations, errors);
                Ok(FrameOutcome {
                    bits,
                    errors,
                    iteration_errors,
                    iterations,
                    covariance: outcome
                        .trace
                        .iterations
                        .iter()
                        .map(|r| r.covariance.clone())
                        .collect(),
                    retrain_fallback: outcome
                        .trace
                        .retrain
                        .is_some_and(|r| r.solver == RetrainSolver::LsFallback),
                    ..Default::default()
                })
            }
        }
    }
}

/// Tallies of one receiver at one SNR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub receiver: String,
    pub kind: ReceiverKind,
    pub snr_db: f64,
    pub frames: u64,
    pub bits: u64,
    pub errors: u64,
    /// Sum over frames of the squared per-frame error count, for the
    /// frame-level standard error of the BER.
    pub errors_sq: u128,
    pub frame_errors: u64,
    pub ber: f64,
    pub fer: f64,
    pub iterations_mean: f64,
    /// Bit errors after each iteration, summed over frames.
    pub iteration_errors: Vec<u64>,
    pub failures: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failure_messages: Vec<String>,
    pub diagnostics: PointDiagnostics,
    /// Set when the receiver could not be prepared at all.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PointDiagnostics {
    pub noise_variance_mean: f64,
    /// Mean of log10 cond(R^T R) for polynomial receivers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition_log10_mean: Option<f64>,
    /// Mean diagonal of the likelihood covariance per iteration.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub covariance_mean: Vec<Vec<f64>>,
    pub retrain_fallbacks: u64,
}

impl PointResult {
    pub fn empty(receiver: &str, kind: ReceiverKind, snr_db: f64) -> Self {
        Self {
            receiver: receiver.to_string(),
            kind,
            snr_db,
            frames: 0,
            bits: 0,
            errors: 0,
            errors_sq: 0,
            frame_errors: 0,
            ber: 0.0,
            fer: 0.0,
            iterations_mean: 0.0,
            iteration_errors: Vec::new(),
            failures: 0,
            failure_messages: Vec::new(),
            diagnostics: PointDiagnostics::default(),
            error: None,
        }
    }

    /// Standard error of the BER from the spread of per-frame error counts.
    pub fn ber_std_error(&self) -> f64 {
        if self.frames < 2 || self.bits == 0 {
            return 0.0;
        }
        let f = self.frames as f64;
        let mean = self.errors as f64 / f;
        let var = ((self.errors_sq as f64 / f) - mean * mean).max(0.0) * f / (f - 1.0);
        (var / f).sqrt() * f / self.bits as f64
    }

    /// BER after iteration `i` (1-based).
    pub fn iteration_ber(&self, i: usize) -> Option<f64> {
        let e = *self.iteration_errors.get(i.checked_sub(1)?)?;
        (self.bits > 0).then(|| e as f64 / self.bits as f64)
    }
}

/// Running sums in frame order; floating-point means are formed at the end
/// so the result is independent of how frames were scheduled.
#[derive(Debug, Default)]
struct Accumulator {
    frames: u64,
    bits: u64,
    errors: u64,
    errors_sq: u128,
    frame_errors: u64,
    iterations: u64,
    iteration_errors: Vec<u64>,
    failures: u64,
    failure_messages: Vec<String>,
    noise_variance: f64,
    condition_log10: f64,
    condition_count: u64,
    covariance: Vec<Vec<f64>>,
    covariance_count: Vec<u64>,
    retrain_fallbacks: u64,
}

const MAX_FAILURE_MESSAGES: usize = 5;

impl Accumulator {
    fn add(&mut self, o: &FrameOutcome, noise_variance: f64) {
        self.frames += 1;
        self.bits += o.bits;
        self.errors += o.errors;
        self.errors_sq += (o.errors as u128).pow(2);
        self.frame_errors += u64::from(o.errors > 0);
        self.iterations += o.iterations as u64;
        if self.iteration_errors.len() < o.iteration_errors.len() {
            self.iteration_errors.resize(o.iteration_errors.len(), 0);
        }
        for (a, e) in self.iteration_errors.iter_mut().zip(&o.iteration_errors) {
            *a += e;
        }
        if let Some(msg) = &o.failure {
            self.failures += 1;
            if self.failure_messages.len() < MAX_FAILURE_MESSAGES {
                self.failure_messages.push(msg.clone());
            }
        }
        self.noise_variance += noise_variance;
        if let Some(c) = o.condition_number {
            self.condition_log10 += c.log10();
            self.condition_count += 1;
        }
        for (i, v) in o.covariance.iter().enumerate() {
            if self.covariance.len() <= i {
                self.covariance.push(vec![0.0; v.len()]);
                self.covariance_count.push(0);
            }
            if self.covariance[i].len() == v.len() {
                self.covariance[i]
                    .iter_mut()
                    .zip(v)
                    .for_each(|(a, b)| *a += b);
                self.covariance_count[i] += 1;
            }
        }
        self.retrain_fallbacks += u64::from(o.retrain_fallback);
    }

    fn finish(self, receiver: &str, kind: ReceiverKind, snr_db: f64) -> PointResult {
        let mut p = PointResult::empty(receiver, kind, snr_db);
        p.frames = self.frames;
        p.bits = self.bits;
        p.errors = self.errors;
        p.errors_sq = self.errors_sq;
        p.frame_errors = self.frame_errors;
        if self.bits > 0 {
            p.ber = self.errors as f64 / self.bits as f64;
        }
        if self.frames > 0 {
            p.fer = self.frame_errors as f64 / self.frames as f64;
            p.iterations_mean = self.iterations as f64 / self.frames as f64;
            p.diagnostics.noise_variance_mean = self.noise_variance / self.frames as f64;
        }
        p.iteration_errors = self.iteration_errors;
        p.failures = self.failures;
        p.failure_messages = self.failure_messages;
        if self.condition_count > 0 {
            p.diagnostics.condition_log10_mean =
                Some(self.condition_log10 / self.condition_count as f64);
        }
        p.diagnostics.covariance_mean = self
            .covariance
            .into_iter()
            .zip(self.covariance_count)
            .map(|(v, n)| v.into_iter().map(|x| x / n.max(1) as f64).collect())
            .collect();
        p.diagnostics.retrain_fallbacks = self.retrain_fallbacks;
        p
    }
}

/// Runs frames `range` in parallel and adds them to `acc` in frame order.
fn run_range(
    receiver: &PreparedReceiver<'_>,
    snr_db: f64,
    range: std::ops::Range<u64>,
    acc: &mut Accumulator,
) {
    let exp = receiver.experiment;
    let outcomes: Vec<(FrameOutcome, f64)> = range
        .into_par_iter()
        .map(|f| match exp.frame(f, snr_db) {
            Ok(frame) => (receiver.run_frame(&frame), frame.noise_variance),
            Err(e) => (
                FrameOutcome {
                    failure: Some(e.to_string()),
                    ..Default::default()
                },
                0.0,
            ),
        })
        .collect();
    for (o, v) in &outcomes {
        acc.add(o, *v);
    }
}

/// Runs one receiver at one SNR under the stopping rule. Frames of a batch
/// run in parallel; tallies are merged in frame order.
pub fn run_point(receiver: &PreparedReceiver<'_>, snr_db: f64, stopping: &Stopping) -> PointResult {
    let mut acc = Accumulator::default();
    let batch = stopping.batch_frames.max(1) as u64;
    let max = stopping.max_frames as u64;
    let mut next = 0u64;
    while next < max {
        let end = (next + batch).min(max);
        run_range(receiver, snr_db, next..end, &mut acc);
        next = end;
        if acc.errors >= stopping.min_errors && acc.frames >= stopping.min_frames as u64 {
            break;
        }
    }
    acc.finish(receiver.label(), receiver.spec.kind, snr_db)
}

/// Runs exactly the frames `first..first + count`, ignoring the stopping rule.
pub fn run_frames(
    receiver: &PreparedReceiver<'_>,
    snr_db: f64,
    first: u64,
    count: usize,
) -> PointResult {
    let mut acc = Accumulator::default();
    run_range(receiver, snr_db, first..first + count as u64, &mut acc);
    acc.finish(receiver.label(), receiver.spec.kind, snr_db)
}

/// Provenance attached to every results document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMetadata {
    pub crate_version: String,
    pub master_seed: u64,
    pub interleaver_seed: u64,
    pub preamble_length: usize,
    pub receiver_seeds: Vec<(String, u64)>,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub metadata: SweepMetadata,
    pub points: Vec<PointResult>,
}

impl SweepResult {
    pub fn point(&self, receiver: &str, snr_db: f64) -> Option<&PointResult> {
        self.points
            .iter()
            .find(|p| p.receiver == receiver && p.snr_db == snr_db)
    }
}

/// Runs every receiver over the SNR grid. A receiver that cannot be
/// prepared yields one errored point per SNR instead of aborting the sweep.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepResult> {
    let exp = Experiment::new(config.clone())?;
    let mut points = Vec::new();
    let mut receiver_seeds = Vec::new();
    for spec in &config.receivers {
        let label = spec.label();
        match exp.prepare(&label) {
            Ok(rx) => {
                receiver_seeds.push((label.clone(), rx.elm_seed));
                for &snr in &config.snr_db {
                    points.push(run_point(&rx, snr, &config.stopping));
                }
            }
            Err(e) => {
                for &snr in &config.snr_db {
                    let mut p = PointResult::empty(&label, spec.kind, snr);
                    p.error = Some(e.to_string());
                    points.push(p);
                }
            }
        }
    }
    Ok(SweepResult {
        metadata: SweepMetadata {
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed: config.master_seed,
            interleaver_seed: exp.link.interleaver.seed(),
            preamble_length: exp.preamble.len(),
            receiver_seeds,
            config: config.clone(),
        },
        points,
    })
}

/// Pretty-printed results document.
pub fn to_json(result: &SweepResult) -> Result<String> {
    serde_json::to_string_pretty(result).map_err(|e| Error::Io(e.to_string()))
}

#[derive(Serialize)]
struct CsvRow<'a> {
    receiver: &'a str,
    snr_db: f64,
    ber: f64,
    fer: f64,
    bits: u64,
    errors: u64,
    iterations_mean: f64,
}

/// Flat plot table, one row per (receiver, SNR).
pub fn to_csv(result: &SweepResult) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for p in &result.points {
        w.serialize(CsvRow {
            receiver: &p.receiver,
            snr_db: p.snr_db,
            ber: p.ber,
            fer: p.fer,
            bits: p.bits,
            errors: p.errors,
            iterations_mean: p.iterations_mean,
        })
        .expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv is utf-8")
}

//! Iterative receiver: SISO post-distorter and BCJR decoder exchanging
//! extrinsic LLRs, with an optional data-aided retraining of the channel ELM.

use serde::{Deserialize, Serialize};

use crate::channel::MemoryPolynomialModel;
use crate::coding::{
    bcjr_decode, soft_symbol_mean, symbol_priors_from_llrs, LlrFrame, LlrKind, PamConstellation,
};
use crate::elm::{ElmModel, LsProjector};
use crate::error::{Error, Result};
use crate::link::LinkLayout;
use crate::postdistort::siso::SymbolBelief;
use crate::postdistort::{
    beliefs_from_llrs, channel_windows, genie_likelihood_params, siso_postdistort,
    CovarianceSource, DiagonalCovariance, LikelihoodParams, SisoElmPostDistorter,
};

/// Ridge weight of the initial channel-ELM fit. Without it the 300-node
/// hidden layer overfits 1200 training windows.
pub const DEFAULT_ELM_RIDGE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TurboConfig {
    pub max_iterations: usize,
    /// Receiver window `M`.
    pub window: usize,
    pub hidden_nodes: usize,
    pub training_length: usize,
    pub data_aided: bool,
    pub virtual_data_length: usize,
    /// Stop once the information-bit decisions repeat between iterations.
    pub early_stop: bool,
    /// Subtract the ELM's all-zero response once from `a(alpha) + i`.
    pub subtract_zero_reference: bool,
    /// Input around which the channel ELM is split into `a(x) + i`.
    pub decomposition_point: DecompositionPoint,
    /// Ridge weight of the initial channel-ELM fit; 0 is the plain pseudo-inverse.
    pub ridge: f64,
    pub covariance: CovarianceEstimator,
    pub retrain: RetrainMethod,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecompositionPoint {
    /// Probe `[0..x..0]`; the LED never emits zero, so this extrapolates.
    Zero,
    /// Probe `[mu..x..mu]` with the constellation's mean level.
    #[default]
    MeanLevel,
}

/// Source of the symbol estimates in the ELM receiver's covariance estimate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovarianceEstimator {
    /// First pass on the training windows with the known symbols, later
    /// passes on the data with the decoder's a-posteriori symbol means.
    #[default]
    Bootstrapped,
    /// Every pass on the data with the a-priori symbol means.
    PlugIn,
}

impl Default for TurboConfig {
    fn default() -> Self {
        Self {
            max_iterations: 5,
            window: 2,
            hidden_nodes: 150,
            training_length: 800,
            data_aided: false,
            virtual_data_length: 0,
            early_stop: false,
            subtract_zero_reference: true,
            decomposition_point: DecompositionPoint::default(),
            ridge: DEFAULT_ELM_RIDGE,
            covariance: CovarianceEstimator::default(),
            retrain: RetrainMethod::default(),
        }
    }
}

impl TurboConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter(
                "max_iterations must be >= 1".into(),
            ));
        }
        if self.hidden_nodes == 0 {
            return Err(Error::InvalidParameter("hidden_nodes must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub siso_mean_abs_extrinsic: f64,
    pub decoder_mean_abs_extrinsic: f64,
    /// Information-bit errors after this iteration, when the truth is known.
    pub bit_errors: Option<usize>,
    /// Mean diagonal of the covariance used by the likelihood.
    pub covariance: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RetrainSolver {
    Tls,
    TruncatedTls,
    LsFallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrainRecord {
    pub windows: usize,
    pub virtual_symbols: usize,
    pub solver: RetrainSolver,
    /// Truncation rank when the truncated solver ran.
    pub rank: Option<usize>,
}

/// Solver for the data-aided retraining.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RetrainMethod {
    /// `-t12 t22^{-1}` on the full `[H Y]`.
    Tls,
    /// TLS after discarding the singular directions below the noise floor.
    #[default]
    TruncatedTls,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TurboTrace {
    pub iterations: Vec<IterationRecord>,
    pub retrain: Option<RetrainRecord>,
    pub stopped_early: bool,
}

#[derive(Debug, Clone)]
pub struct TurboOutcome {
    pub info_bits: Vec<u8>,
    pub trace: TurboTrace,
}

/// How the receiver models the channel.
#[derive(Debug, Clone)]
pub enum ChannelKnowledge<'a> {
    /// Trained channel ELM.
    Elm(ElmModel),
    /// True memory polynomial and noise variance.
    Genie {
        channel: &'a MemoryPolynomialModel,
        noise_variance: f64,
    },
}

/// One received frame: `stream` holds the training samples followed by the
/// data samples, `training` the known training symbols.
#[derive(Debug, Clone, Copy)]
pub struct TurboInput<'a> {
    pub stream: &'a [f64],
    pub training: &'a [f64],
    /// Transmitted information bits, used only for the trace.
    pub truth: Option<&'a [u8]>,
}

/// Trains the channel ELM on the training part of the frame, then runs the
/// loop. In genie mode no training happens.
pub fn run_turbo(
    input: TurboInput<'_>,
    link: &LinkLayout,
    cfg: &TurboConfig,
    elm_seed: u64,
    genie: Option<(&MemoryPolynomialModel, f64)>,
) -> Result<TurboOutcome> {
    let knowledge = match genie {
        Some((channel, noise_variance)) => ChannelKnowledge::Genie {
            channel,
            noise_variance,
        },
        None => {
            if input.training.is_empty() {
                return Err(Error::InvalidParameter(
                    "ELM receiver needs a training sequence".into(),
                ));
            }
            let t = input.training.len();
            let y_train = input.stream.get(..t).ok_or_else(|| {
                Error::DimensionMismatch("stream shorter than the training sequence".into())
            })?;
            let ts = channel_windows(input.training, y_train, cfg.window)?;
            let model = ElmModel::new(
                2 * cfg.window + 1,
                cfg.window + 1,
                cfg.hidden_nodes,
                elm_seed,
            )?;
            ChannelKnowledge::Elm(model.train_ridge(&ts, cfg.ridge)?)
        }
    };
    run_turbo_with(input, link, cfg, knowledge)
}

/// Trains the channel ELM through a cached projector for a fixed training
/// sequence (same hidden layer and inputs across frames).
pub fn train_with_projector(
    model: &ElmModel,
    projector: &LsProjector,
    training: &[f64],
    y_train: &[f64],
    window: usize,
) -> Result<ElmModel> {
    let ts = channel_windows(training, y_train, window)?;
    model.train_with_projector(projector, &ts.targets)
}

pub fn run_turbo_with(
    input: TurboInput<'_>,
    link: &LinkLayout,
    cfg: &TurboConfig,
    knowledge: ChannelKnowledge<'_>,
) -> Result<TurboOutcome> {
    cfg.validate()?;
    let c = &link.constellation;
    let t = input.training.len();
    let d = link.data_symbols();
    if input.stream.len() != t + d {
        return Err(Error::DimensionMismatch(format!(
            "stream of {} samples for {t} training and {d} data symbols",
            input.stream.len()
        )));
    }
    let y = input.stream;

    let (mut elm_pd, genie) = match knowledge {
        ChannelKnowledge::Elm(model) => (Some(elm_post_distorter(model, c, cfg)?), None),
        ChannelKnowledge::Genie {
            channel,
            noise_variance,
        } => (None, Some((channel, noise_variance))),
    };

    let mut trace = TurboTrace::default();
    let mut a_priori = link.initial_priors();
    let mut decisions = Vec::new();
    let mut app_means: Option<Vec<f64>> = None;
    for it in 1..=cfg.max_iterations {
        let data_beliefs = beliefs_from_llrs(&a_priori, c)?;
        let params: LikelihoodParams = match (&elm_pd, genie) {
            (Some(pd), _) => {
                let mut means: Vec<f64> = input.training.to_vec();
                means.extend(data_beliefs.iter().map(|b| b.mean(c)));
                let source = match (cfg.covariance, &app_means) {
                    (CovarianceEstimator::Bootstrapped, Some(app)) => {
                        CovarianceSource::DataEstimates(app)
                    }
                    (CovarianceEstimator::Bootstrapped, None) => CovarianceSource::Training {
                        symbols: input.training,
                        neighbor_mean: c.mean_level(),
                    },
                    (CovarianceEstimator::PlugIn, _) => {
                        CovarianceSource::DataEstimates(&means[t..])
                    }
                };
                pd.likelihood_params(y, &means, t, d, source)?
            }
            (None, Some((channel, noise_variance))) => {
                let mut beliefs: Vec<SymbolBelief> = input
                    .training
                    .iter()
                    .map(|&v| SymbolBelief::Known(v))
                    .collect();
                beliefs.extend(data_beliefs);
                genie_likelihood_params(channel, &beliefs, t, d, noise_variance, cfg.window, c)?
            }
            (None, None) => unreachable!("receiver has either an ELM or genie knowledge"),
        };
        let siso = siso_postdistort(y, t, &a_priori, &params, c)?;
        debug_assert_eq!(siso.extrinsic.kind, LlrKind::Extrinsic);

        let dec = bcjr_decode(&link.to_decoder(&siso.extrinsic)?, &link.code)?;
        let new_decisions = dec.info_decisions();
        let bit_errors = input.truth.map(|truth| {
            truth
                .iter()
                .zip(&new_decisions)
                .filter(|(a, b)| a != b)
                .count()
        });
        trace.iterations.push(IterationRecord {
            iteration: it,
            siso_mean_abs_extrinsic: mean_abs(&siso.extrinsic.values[..link.coded_len()]),
            decoder_mean_abs_extrinsic: mean_abs(&dec.coded_extrinsic.values),
            bit_errors,
            covariance: covariance_summary(&params.covariance),
        });
        let repeated = it > 1 && new_decisions == decisions;
        decisions = new_decisions;
        if it == cfg.max_iterations {
            break;
        }
        if cfg.early_stop && repeated {
            trace.stopped_early = true;
            break;
        }
        a_priori = link.from_decoder(&dec.coded_extrinsic)?;
        if elm_pd.is_some() {
            let app = link.padded_from_code_order(&dec.coded_app.values, LlrKind::APosteriori)?;
            app_means = Some(soft_symbols(&app, link)?);
        }

        if it == 1 && cfg.data_aided {
            if let (Some(pd), Some(soft)) = (&elm_pd, &app_means) {
                let (model, record) = retrain_data_aided(
                    pd.channel(),
                    input.training,
                    y,
                    soft,
                    cfg.virtual_data_length,
                    cfg.retrain,
                    cfg.ridge,
                )?;
                elm_pd = Some(elm_post_distorter(model, c, cfg)?);
                trace.retrain = Some(record);
            }
        }
    }
    Ok(TurboOutcome {
        info_bits: decisions,
        trace,
    })
}

fn elm_post_distorter(
    model: ElmModel,
    c: &PamConstellation,
    cfg: &TurboConfig,
) -> Result<SisoElmPostDistorter> {
    let pd = SisoElmPostDistorter::new(model, c.clone())?
        .with_zero_reference_subtracted(cfg.subtract_zero_reference);
    match cfg.decomposition_point {
        DecompositionPoint::Zero => Ok(pd),
        DecompositionPoint::MeanLevel => pd.with_reference_level(c.mean_level()),
    }
}

/// Symbol means from per-bit LLRs in padded transmission order.
pub fn soft_symbols(llrs: &LlrFrame, link: &LinkLayout) -> Result<Vec<f64>> {
    let c = &link.constellation;
    llrs.values
        .chunks(c.bits_per_symbol())
        .map(|l| Ok(soft_symbol_mean(&symbol_priors_from_llrs(l, c)?, c)))
        .collect()
}

/// Retrains the channel ELM by total least squares on the exact training
/// windows plus virtual windows built from the first `virtual_len` soft data
/// symbols, which directly follow the training in `stream`. Falls back to
/// least squares when the TLS solution does not exist.
///
/// Plain TLS assumes equal error levels in every column of `[H Y]`. The
/// hidden matrix has singular values far below the target noise, so its
/// near-null directions win and the solution explodes; the truncated form
/// removes them first. `ridge` augments the truncated system with the same
/// penalty as the initial channel ELM.
pub fn retrain_data_aided(
    channel: &ElmModel,
    training: &[f64],
    stream: &[f64],
    soft_data: &[f64],
    virtual_len: usize,
    method: RetrainMethod,
    ridge: f64,
) -> Result<(ElmModel, RetrainRecord)> {
    let window = channel.output_dim().saturating_sub(1);
    let v = virtual_len.min(soft_data.len());
    let total = training.len() + v;
    if stream.len() < total {
        return Err(Error::DimensionMismatch(format!(
            "{} samples for {total} training and virtual symbols",
            stream.len()
        )));
    }
    let mut x = training.to_vec();
    x.extend_from_slice(&soft_data[..v]);
    let ts = channel_windows(&x, &stream[..total], window)?;
    let solved = match method {
        RetrainMethod::Tls => channel
            .train_tls(&ts)
            .map(|m| (m, RetrainSolver::Tls, None)),
        RetrainMethod::TruncatedTls => channel
            .train_tls_truncated_ridge(&ts, ridge)
            .map(|(m, rank)| (m, RetrainSolver::TruncatedTls, Some(rank))),
    };
    let (model, solver, rank) = match solved {
        Ok(v) => v,
        Err(Error::TlsNoSolution { .. }) => {
            (channel.train_ls(&ts)?, RetrainSolver::LsFallback, None)
        }
        Err(e) => return Err(e),
    };
    Ok((
        model,
        RetrainRecord {
            windows: ts.len(),
            virtual_symbols: v,
            solver,
            rank,
        },
    ))
}

fn mean_abs(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().map(|x| x.abs()).sum::<f64>() / v.len() as f64
    }
}

fn covariance_summary(cov: &DiagonalCovariance) -> Vec<f64> {
    match cov {
        DiagonalCovariance::Shared(v) => v.clone(),
        DiagonalCovariance::PerSymbol(rows) => {
            let width = rows.first().map_or(0, Vec::len);
            let mut out = vec![0.0; width];
            for r in rows {
                out.iter_mut().zip(r).for_each(|(o, v)| *o += v);
            }
            out.iter_mut().for_each(|o| *o /= rows.len().max(1) as f64);
            out
        }
    }
}

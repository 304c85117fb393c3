//! Soft-in soft-out post-distorter.
//!
//! For data symbol `x_s` the receiver looks at the window
//! `y_s = [y_s, y_{s+1}, .., y_{s+M}]` and models it as
//! `y_s = a(x_s) + i_s + v_s`, with `a` the contribution of the desired
//! symbol, `i_s` the interference mean and `v_s` Gaussian with a diagonal
//! covariance. Symbol posteriors combine that likelihood with the a-priori
//! LLRs; the extrinsic bit LLRs are posterior minus a-priori.

use serde::{Deserialize, Serialize};

use crate::channel::MemoryPolynomialModel;
use crate::coding::llr::{normalize_log_probs, posterior_bit_llrs_from_log, symbol_log_priors};
use crate::coding::{clamp_llr, soft_symbol_mean, LlrFrame, LlrKind, PamConstellation};
use crate::elm::{ElmModel, TrainingSet};
use crate::error::{Error, Result};
use crate::numerics::RealMatrix;

/// Floor applied to every diagonal covariance entry.
pub const COVARIANCE_FLOOR: f64 = 1e-12;

/// What the receiver knows about one transmitted symbol.
#[derive(Debug, Clone, PartialEq)]
pub enum SymbolBelief {
    /// Known symbol value (training).
    Known(f64),
    /// Probabilities over the constellation levels.
    Soft(Vec<f64>),
}

impl SymbolBelief {
    pub fn mean(&self, c: &PamConstellation) -> f64 {
        match self {
            SymbolBelief::Known(v) => *v,
            SymbolBelief::Soft(p) => soft_symbol_mean(p, c),
        }
    }

    /// `(E[f(x)], Var[f(x)])` under the belief.
    pub fn moments(&self, c: &PamConstellation, f: impl Fn(f64) -> f64) -> (f64, f64) {
        match self {
            SymbolBelief::Known(v) => (f(*v), 0.0),
            SymbolBelief::Soft(p) => {
                let (mut m1, mut m2) = (0.0, 0.0);
                for (pi, &a) in p.iter().zip(c.levels()) {
                    let v = f(a);
                    m1 += pi * v;
                    m2 += pi * v * v;
                }
                (m1, (m2 - m1 * m1).max(0.0))
            }
        }
    }
}

/// Beliefs for data symbols from `P` a-priori LLRs each.
pub fn beliefs_from_llrs(llrs: &LlrFrame, c: &PamConstellation) -> Result<Vec<SymbolBelief>> {
    let bits = c.bits_per_symbol();
    if llrs.len() % bits != 0 {
        return Err(Error::DimensionMismatch(format!(
            "{} LLRs for {bits}-bit symbols",
            llrs.len()
        )));
    }
    Ok(llrs
        .values
        .chunks(bits)
        .map(|l| SymbolBelief::Soft(normalize_log_probs(&symbol_log_priors(l, c))))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DiagonalCovariance {
    /// One diagonal shared by every window.
    Shared(Vec<f64>),
    /// A diagonal per data symbol.
    PerSymbol(Vec<Vec<f64>>),
}

impl DiagonalCovariance {
    fn get(&self, n: usize) -> &[f64] {
        match self {
            DiagonalCovariance::Shared(v) => v,
            DiagonalCovariance::PerSymbol(v) => &v[n],
        }
    }
}

/// Everything the SISO likelihood needs for one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodParams {
    /// Window parameter `M`; windows have `M + 1` coordinates.
    pub window: usize,
    /// `signal_table[i][q] = a_q(alpha_i)`.
    pub signal_table: Vec<Vec<f64>>,
    /// `interference_mean[n][q]` for data symbol `n`.
    pub interference_mean: Vec<Vec<f64>>,
    pub covariance: DiagonalCovariance,
}

#[derive(Debug, Clone)]
pub struct SisoOutput {
    pub extrinsic: LlrFrame,
    /// Normalized symbol posteriors per data symbol.
    pub posteriors: Vec<Vec<f64>>,
}

/// Runs the SISO post-distorter over the data symbols that start at stream
/// index `data_start`. `y` is the whole received stream; window coordinates
/// past its end are left out of the likelihood.
pub fn siso_postdistort(
    y: &[f64],
    data_start: usize,
    a_priori: &LlrFrame,
    params: &LikelihoodParams,
    c: &PamConstellation,
) -> Result<SisoOutput> {
    if a_priori.kind != LlrKind::APriori {
        return Err(Error::InvalidParameter(format!(
            "SISO input tagged {:?}, expected a-priori",
            a_priori.kind
        )));
    }
    let bits = c.bits_per_symbol();
    let count = a_priori.len() / bits;
    if a_priori.len() != count * bits {
        return Err(Error::DimensionMismatch(format!(
            "{} LLRs for {bits}-bit symbols",
            a_priori.len()
        )));
    }
    if data_start + count > y.len() {
        return Err(Error::DimensionMismatch(format!(
            "{count} data symbols from {data_start} in a stream of {}",
            y.len()
        )));
    }
    let width = params.window + 1;
    if params.signal_table.len() != c.size()
        || params.signal_table.iter().any(|r| r.len() != width)
        || params.interference_mean.len() != count
        || params.interference_mean.iter().any(|r| r.len() != width)
    {
        return Err(Error::DimensionMismatch(
            "likelihood parameters do not match the frame".into(),
        ));
    }
    match &params.covariance {
        DiagonalCovariance::Shared(v) if v.len() != width => {
            return Err(Error::DimensionMismatch("covariance width".into()));
        }
        DiagonalCovariance::PerSymbol(v)
            if v.len() != count || v.iter().any(|r| r.len() != width) =>
        {
            return Err(Error::DimensionMismatch(
                "per-symbol covariance shape".into(),
            ));
        }
        _ => {}
    }

    let mut extrinsic = Vec::with_capacity(a_priori.len());
    let mut posteriors = Vec::with_capacity(count);
    let mut logp = vec![0.0; c.size()];
    for n in 0..count {
        let s = data_start + n;
        let q_max = width.min(y.len() - s);
        let cov = params.covariance.get(n);
        let ibar = &params.interference_mean[n];
        let ap = &a_priori.values[n * bits..(n + 1) * bits];
        let priors = symbol_log_priors(ap, c);
        for (i, lp) in logp.iter_mut().enumerate() {
            let a = &params.signal_table[i];
            let mut ll = 0.0;
            for q in 0..q_max {
                let r = y[s + q] - a[q] - ibar[q];
                ll -= 0.5 * r * r / cov[q].max(COVARIANCE_FLOOR);
            }
            *lp = ll + priors[i];
        }
        if logp.iter().any(|v| v.is_nan()) {
            return Err(Error::NonFinite("SISO log-likelihoods"));
        }
        let post_llrs = posterior_bit_llrs_from_log(&logp, c);
        extrinsic.extend(
            post_llrs
                .iter()
                .zip(ap)
                .map(|(p, a)| clamp_llr(p - clamp_llr(*a))),
        );
        posteriors.push(normalize_log_probs(&logp));
    }
    Ok(SisoOutput {
        extrinsic: LlrFrame::new(extrinsic, LlrKind::Extrinsic),
        posteriors,
    })
}

/// ELM input `[x_{s-M}, .., x_{s+M}]` from stream means, zeros outside the
/// stream, with the centre replaced by `center`.
pub fn window_input(means: &[f64], s: usize, window: usize, center: f64, out: &mut [f64]) {
    debug_assert_eq!(out.len(), 2 * window + 1);
    for (k, o) in out.iter_mut().enumerate() {
        let j = s as isize + k as isize - window as isize;
        *o = if j >= 0 && (j as usize) < means.len() {
            means[j as usize]
        } else {
            0.0
        };
    }
    out[window] = center;
}

/// Training windows for the channel ELM: inputs `[x_{n-M}, .., x_{n+M}]`,
/// targets `[y_n, .., y_{n+M}]` for every `n` whose target window fits.
pub fn channel_windows(x: &[f64], y: &[f64], window: usize) -> Result<TrainingSet> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} symbols vs {} samples",
            x.len(),
            y.len()
        )));
    }
    if x.len() <= 2 * window {
        return Err(Error::InvalidParameter(format!(
            "sequence of {} too short for window {window}",
            x.len()
        )));
    }
    let count = x.len() - window;
    let inputs = channel_window_inputs(x, window, count);
    let mut targets = RealMatrix::zeros(count, window + 1);
    for n in 0..count {
        targets.row_mut(n).copy_from_slice(&y[n..n + window + 1]);
    }
    TrainingSet::new(inputs, targets)
}

/// Input rows of [`channel_windows`] for the first `count` positions.
pub fn channel_window_inputs(x: &[f64], window: usize, count: usize) -> RealMatrix {
    let mut inputs = RealMatrix::zeros(count, 2 * window + 1);
    for n in 0..count {
        window_input(x, n, window, x[n], inputs.row_mut(n));
    }
    inputs
}

/// Trains the `2M+1 -> M+1` channel ELM on a known training pair by least squares.
pub fn elm_channel_train(
    x_train: &[f64],
    y_train: &[f64],
    window: usize,
    hidden: usize,
    seed: u64,
) -> Result<ElmModel> {
    let ts = channel_windows(x_train, y_train, window)?;
    ElmModel::new(2 * window + 1, window + 1, hidden, seed)?.train_ls(&ts)
}

/// `a(alpha_i) = ELM([r, .., alpha_i, .., r])` for every level, with the
/// reference input `r` (zero in the plain decomposition).
pub fn estimate_signal_table(
    channel: &ElmModel,
    c: &PamConstellation,
    reference: f64,
) -> Result<Vec<Vec<f64>>> {
    let window = channel_window(channel)?;
    let mut s = vec![reference; 2 * window + 1];
    c.levels()
        .iter()
        .map(|&a| {
            s[window] = a;
            channel.predict(&s)
        })
        .collect()
}

/// `i_s = ELM([x_{s-M}, .., r, .., x_{s+M}])` from stream means.
pub fn estimate_interference_mean(
    channel: &ElmModel,
    means: &[f64],
    s: usize,
    reference: f64,
) -> Result<Vec<f64>> {
    let window = channel_window(channel)?;
    let mut input = vec![0.0; 2 * window + 1];
    window_input(means, s, window, reference, &mut input);
    channel.predict(&input)
}

/// Diagonal covariance as the per-coordinate mean of squared residuals,
/// floored at [`COVARIANCE_FLOOR`]. Residual rows may be shorter than the
/// window near the end of a stream.
pub fn estimate_covariance(residuals: &[Vec<f64>], window: usize) -> Result<Vec<f64>> {
    if residuals.len() < window + 2 {
        return Err(Error::InvalidParameter(format!(
            "{} windows to estimate a covariance of width {}",
            residuals.len(),
            window + 1
        )));
    }
    let mut sum = vec![0.0; window + 1];
    let mut count = vec![0usize; window + 1];
    for r in residuals {
        for (q, v) in r.iter().take(window + 1).enumerate() {
            sum[q] += v * v;
            count[q] += 1;
        }
    }
    Ok(sum
        .iter()
        .zip(&count)
        .map(|(&s, &n)| {
            if n > 0 {
                (s / n as f64).max(COVARIANCE_FLOOR)
            } else {
                COVARIANCE_FLOOR
            }
        })
        .collect())
}

fn channel_window(channel: &ElmModel) -> Result<usize> {
    let out = channel.output_dim();
    if out == 0 || channel.input_dim() != 2 * out - 1 {
        return Err(Error::DimensionMismatch(format!(
            "channel ELM {} -> {} is not 2M+1 -> M+1",
            channel.input_dim(),
            out
        )));
    }
    Ok(out - 1)
}

/// SISO post-distorter backed by a channel ELM.
#[derive(Debug, Clone)]
pub struct SisoElmPostDistorter {
    channel: ElmModel,
    window: usize,
    constellation: PamConstellation,
    signal_table: Vec<Vec<f64>>,
    reference: f64,
    zero_reference: Vec<f64>,
    subtract_zero_reference: bool,
}

impl SisoElmPostDistorter {
    pub fn new(channel: ElmModel, constellation: PamConstellation) -> Result<Self> {
        let window = channel_window(&channel)?;
        let signal_table = estimate_signal_table(&channel, &constellation, 0.0)?;
        let zero_reference = channel.predict(&vec![0.0; 2 * window + 1])?;
        Ok(Self {
            channel,
            window,
            constellation,
            signal_table,
            reference: 0.0,
            zero_reference,
            subtract_zero_reference: false,
        })
    }

    /// Both `a(alpha)` and the interference estimate contain the ELM's
    /// response to the all-reference input. When enabled, that response is
    /// subtracted once from the mean `a(alpha) + i`.
    pub fn with_zero_reference_subtracted(mut self, enabled: bool) -> Self {
        self.subtract_zero_reference = enabled;
        self
    }

    /// Splits the channel around the input `r` instead of zero: the desired
    /// symbol is probed as `[r..alpha..r]` and the neighbours with `r` in the
    /// centre. Useful when zero lies outside the transmitted range.
    pub fn with_reference_level(mut self, r: f64) -> Result<Self> {
        self.signal_table = estimate_signal_table(&self.channel, &self.constellation, r)?;
        self.zero_reference = self.channel.predict(&vec![r; 2 * self.window + 1])?;
        self.reference = r;
        Ok(self)
    }

    /// ELM response to the all-reference input.
    pub fn zero_reference(&self) -> &[f64] {
        &self.zero_reference
    }

    pub fn reference_level(&self) -> f64 {
        self.reference
    }

    /// Signal table as used in the likelihood.
    fn effective_table(&self) -> Vec<Vec<f64>> {
        if !self.subtract_zero_reference {
            return self.signal_table.clone();
        }
        self.signal_table
            .iter()
            .map(|a| {
                a.iter()
                    .zip(&self.zero_reference)
                    .map(|(u, z)| u - z)
                    .collect()
            })
            .collect()
    }

    pub fn channel(&self) -> &ElmModel {
        &self.channel
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn signal_table(&self) -> &[Vec<f64>] {
        &self.signal_table
    }

    /// Own-symbol response `ELM([0..x..0])` as used in the likelihood.
    fn own_response(
        &self,
        x: f64,
        input: &mut [f64],
        scratch: &mut [f64],
        out: &mut [f64],
    ) -> Result<()> {
        input.iter_mut().for_each(|v| *v = self.reference);
        input[self.window] = x;
        self.channel.predict_into(input, scratch, out)?;
        if self.subtract_zero_reference {
            out.iter_mut()
                .zip(&self.zero_reference)
                .for_each(|(o, z)| *o -= z);
        }
        Ok(())
    }

    /// Interference means and the covariance for the `count` data symbols
    /// starting at `data_start`. `means` covers the whole stream.
    pub fn likelihood_params(
        &self,
        y: &[f64],
        means: &[f64],
        data_start: usize,
        count: usize,
        source: CovarianceSource<'_>,
    ) -> Result<LikelihoodParams> {
        if means.len() != y.len() || data_start + count > y.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} means, {} samples, data {data_start}..{}",
                means.len(),
                y.len(),
                data_start + count
            )));
        }
        let m = self.window;
        let mut input = vec![0.0; 2 * m + 1];
        let mut scratch = vec![0.0; self.channel.hidden_count()];
        let mut own = vec![0.0; m + 1];
        let mut interference = Vec::with_capacity(count);
        for n in 0..count {
            let mut ibar = vec![0.0; m + 1];
            window_input(means, data_start + n, m, self.reference, &mut input);
            self.channel.predict_into(&input, &mut scratch, &mut ibar)?;
            interference.push(ibar);
        }

        let mut residuals = Vec::new();
        match source {
            CovarianceSource::DataEstimates(estimates) => {
                if estimates.len() != count {
                    return Err(Error::DimensionMismatch(format!(
                        "{} symbol estimates for {count} data symbols",
                        estimates.len()
                    )));
                }
                for (n, (&xh, ibar)) in estimates.iter().zip(&interference).enumerate() {
                    let s = data_start + n;
                    self.own_response(xh, &mut input, &mut scratch, &mut own)?;
                    let q_max = (m + 1).min(y.len() - s);
                    residuals.push((0..q_max).map(|q| y[s + q] - own[q] - ibar[q]).collect());
                }
            }
            CovarianceSource::Training {
                symbols,
                neighbor_mean,
            } => {
                if symbols.len() > y.len() {
                    return Err(Error::DimensionMismatch(format!(
                        "{} training symbols for {} samples",
                        symbols.len(),
                        y.len()
                    )));
                }
                let blind = vec![neighbor_mean; y.len()];
                let mut ibar = vec![0.0; m + 1];
                for s in m.min(symbols.len())..symbols.len() {
                    window_input(&blind, s, m, self.reference, &mut input);
                    self.channel.predict_into(&input, &mut scratch, &mut ibar)?;
                    self.own_response(symbols[s], &mut input, &mut scratch, &mut own)?;
                    let q_max = (m + 1).min(y.len() - s);
                    residuals.push((0..q_max).map(|q| y[s + q] - own[q] - ibar[q]).collect());
                }
            }
        }
        let covariance = estimate_covariance(&residuals, m)?;
        Ok(LikelihoodParams {
            window: m,
            signal_table: self.effective_table(),
            interference_mean: interference,
            covariance: DiagonalCovariance::Shared(covariance),
        })
    }

    /// One SISO pass with the given stream means and a-priori LLRs.
    pub fn run(
        &self,
        y: &[f64],
        means: &[f64],
        data_start: usize,
        a_priori: &LlrFrame,
        source: CovarianceSource<'_>,
    ) -> Result<(SisoOutput, LikelihoodParams)> {
        let count = a_priori.len() / self.constellation.bits_per_symbol();
        let params = self.likelihood_params(y, means, data_start, count, source)?;
        let out = siso_postdistort(y, data_start, a_priori, &params, &self.constellation)?;
        Ok((out, params))
    }
}

/// Residuals behind the shared covariance estimate of the ELM receiver.
#[derive(Debug, Clone, Copy)]
pub enum CovarianceSource<'a> {
    /// `y - a(x_hat_n) - i_n` on the data windows, one estimate per data symbol.
    DataEstimates(&'a [f64]),
    /// `y - a(x_n) - i_n` on the training windows (training starts the
    /// stream), with the known `x_n` and every neighbour set to
    /// `neighbor_mean`, i.e. the interference as seen without feedback.
    Training {
        symbols: &'a [f64],
        neighbor_mean: f64,
    },
}

/// Exact likelihood parameters from the true memory polynomial: the signal
/// table holds the true lag responses, the interference mean and variance
/// come from the beliefs, and the noise variance is added to the diagonal.
pub fn genie_likelihood_params(
    channel: &MemoryPolynomialModel,
    beliefs: &[SymbolBelief],
    data_start: usize,
    count: usize,
    noise_variance: f64,
    window: usize,
    c: &PamConstellation,
) -> Result<LikelihoodParams> {
    if data_start + count > beliefs.len() {
        return Err(Error::DimensionMismatch(format!(
            "data {data_start}..{} with {} beliefs",
            data_start + count,
            beliefs.len()
        )));
    }
    if !(noise_variance >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "noise variance {noise_variance}"
        )));
    }
    let mc = channel.memory();
    let signal_table = c
        .levels()
        .iter()
        .map(|&a| {
            (0..=window)
                .map(|q| {
                    if q <= mc {
                        channel.lag_response(q, a)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    // moments[j][m] = (E, Var) of g_m(x_j).
    let moments: Vec<Vec<(f64, f64)>> = beliefs
        .iter()
        .map(|b| {
            (0..=mc)
                .map(|m| b.moments(c, |x| channel.lag_response(m, x)))
                .collect()
        })
        .collect();
    let mut interference = Vec::with_capacity(count);
    let mut variance = Vec::with_capacity(count);
    for n in 0..count {
        let s = data_start + n;
        let mut ibar = vec![0.0; window + 1];
        let mut var = vec![noise_variance; window + 1];
        for q in 0..=window {
            for m in 0..=mc {
                if m == q || s + q < m {
                    continue;
                }
                let j = s + q - m;
                if j >= beliefs.len() {
                    continue;
                }
                let (e, v) = moments[j][m];
                ibar[q] += e;
                var[q] += v;
            }
        }
        interference.push(ibar);
        variance.push(var.into_iter().map(|v| v.max(COVARIANCE_FLOOR)).collect());
    }
    Ok(LikelihoodParams {
        window,
        signal_table,
        interference_mean: interference,
        covariance: DiagonalCovariance::PerSymbol(variance),
    })
}

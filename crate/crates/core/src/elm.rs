//! Extreme learning machine: a single hidden layer with random, fixed input
//! weights and biases, and output weights learned in closed form.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{self, RealMatrix};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    #[default]
    Sine,
    Sigmoid,
    /// Gaussian bump `exp(-t^2)` of the node's projection.
    RadialBasis,
}

impl Activation {
    #[inline]
    pub fn apply(self, t: f64) -> f64 {
        match self {
            Activation::Sine => t.sin(),
            Activation::Sigmoid => 1.0 / (1.0 + (-t).exp()),
            Activation::RadialBasis => (-t * t).exp(),
        }
    }
}

/// `N` input vectors of length `U` paired with `N` targets of length `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub inputs: RealMatrix,
    pub targets: RealMatrix,
}

impl TrainingSet {
    pub fn new(inputs: RealMatrix, targets: RealMatrix) -> Result<Self> {
        if inputs.rows() == 0 {
            return Err(Error::InvalidParameter("training set is empty".into()));
        }
        if inputs.rows() != targets.rows() {
            return Err(Error::DimensionMismatch(format!(
                "{} inputs with {} targets",
                inputs.rows(),
                targets.rows()
            )));
        }
        Ok(Self { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.rows() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElmModel {
    input_dim: usize,
    output_dim: usize,
    hidden_count: usize,
    seed: u64,
    activation: Activation,
    /// `L x U`, row `i` is the input weight vector of hidden node `i`.
    input_weights: RealMatrix,
    biases: Vec<f64>,
    /// `L x Q`; absent until trained.
    output_weights: Option<RealMatrix>,
}

impl ElmModel {
    /// Draws input weights and biases uniformly on `[-1, 1]` from a stream keyed by `seed`.
    pub fn new(
        input_dim: usize,
        output_dim: usize,
        hidden_count: usize,
        seed: u64,
    ) -> Result<Self> {
        Self::with_activation(input_dim, output_dim, hidden_count, seed, Activation::Sine)
    }

    pub fn with_activation(
        input_dim: usize,
        output_dim: usize,
        hidden_count: usize,
        seed: u64,
        activation: Activation,
    ) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 || hidden_count == 0 {
            return Err(Error::InvalidParameter(format!(
                "ELM dimensions must be positive (U={input_dim}, Q={output_dim}, L={hidden_count})"
            )));
        }
        let mut r = rng::stream(seed);
        let weights = (0..hidden_count * input_dim)
            .map(|_| r.gen_range(-1.0..=1.0))
            .collect();
        let biases = (0..hidden_count).map(|_| r.gen_range(-1.0..=1.0)).collect();
        Ok(Self {
            input_dim,
            output_dim,
            hidden_count,
            seed,
            activation,
            input_weights: RealMatrix::from_row_major(hidden_count, input_dim, weights)?,
            biases,
            output_weights: None,
        })
    }

    /// Model with explicit hidden-layer parameters (`weights` is `L x U`).
    pub fn from_parts(
        weights: RealMatrix,
        biases: Vec<f64>,
        output_dim: usize,
        activation: Activation,
    ) -> Result<Self> {
        if weights.rows() != biases.len()
            || weights.rows() == 0
            || weights.cols() == 0
            || output_dim == 0
        {
            return Err(Error::DimensionMismatch(format!(
                "{:?} input weights with {} biases",
                weights.shape(),
                biases.len()
            )));
        }
        Ok(Self {
            input_dim: weights.cols(),
            output_dim,
            hidden_count: weights.rows(),
            seed: 0,
            activation,
            input_weights: weights,
            biases,
            output_weights: None,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn hidden_count(&self) -> usize {
        self.hidden_count
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_weights(&self) -> &RealMatrix {
        &self.input_weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn output_weights(&self) -> Option<&RealMatrix> {
        self.output_weights.as_ref()
    }

    pub fn is_trained(&self) -> bool {
        self.output_weights.is_some()
    }

    /// Same hidden layer, new output weights.
    pub fn with_output_weights(&self, beta: RealMatrix) -> Result<Self> {
        if beta.shape() != (self.hidden_count, self.output_dim) {
            return Err(Error::DimensionMismatch(format!(
                "output weights {:?}, expected {:?}",
                beta.shape(),
                (self.hidden_count, self.output_dim)
            )));
        }
        if !beta.is_finite() {
            return Err(Error::NonFinite("ELM output weights"));
        }
        Ok(Self {
            output_weights: Some(beta),
            ..self.clone()
        })
    }

    /// Hidden layer response to one input vector.
    pub fn hidden_row(&self, s: &[f64], out: &mut [f64]) {
        debug_assert_eq!(s.len(), self.input_dim);
        for (i, o) in out.iter_mut().enumerate() {
            let w = self.input_weights.row(i);
            let t: f64 = w.iter().zip(s).map(|(a, b)| a * b).sum::<f64>() + self.biases[i];
            *o = self.activation.apply(t);
        }
    }

    /// `N x L` hidden layer output matrix.
    pub fn hidden_matrix(&self, inputs: &RealMatrix) -> Result<RealMatrix> {
        if inputs.cols() != self.input_dim {
            return Err(Error::DimensionMismatch(format!(
                "inputs have width {}, model expects {}",
                inputs.cols(),
                self.input_dim
            )));
        }
        if !inputs.is_finite() {
            return Err(Error::NonFinite("ELM inputs"));
        }
        let mut h = RealMatrix::zeros(inputs.rows(), self.hidden_count);
        for j in 0..inputs.rows() {
            let s = inputs.row(j).to_vec();
            self.hidden_row(&s, h.row_mut(j));
        }
        Ok(h)
    }

    fn check_set(&self, ts: &TrainingSet) -> Result<()> {
        if ts.inputs.cols() != self.input_dim || ts.targets.cols() != self.output_dim {
            return Err(Error::DimensionMismatch(format!(
                "training set {}->{}, model {}->{}",
                ts.inputs.cols(),
                ts.targets.cols(),
                self.input_dim,
                self.output_dim
            )));
        }
        Ok(())
    }

    /// Least-squares output weights `beta = pinv(H) Y`.
    pub fn train_ls(&self, ts: &TrainingSet) -> Result<Self> {
        self.train_ridge(ts, 0.0)
    }

    /// Least squares with an optional ridge term `lambda ||beta||^2`
    /// (solved as an augmented least-squares problem). `lambda = 0` is plain LS.
    pub fn train_ridge(&self, ts: &TrainingSet, lambda: f64) -> Result<Self> {
        self.check_set(ts)?;
        if !(lambda >= 0.0) {
            return Err(Error::InvalidParameter(format!("ridge {lambda}")));
        }
        let h = self.hidden_matrix(&ts.inputs)?;
        let beta = if lambda == 0.0 {
            numerics::solve_ls(&h, &ts.targets)?
        } else {
            let aug = h.vcat(&RealMatrix::identity(self.hidden_count).scale(lambda.sqrt()))?;
            let y = ts
                .targets
                .vcat(&RealMatrix::zeros(self.hidden_count, self.output_dim))?;
            numerics::solve_ls(&aug, &y)?
        };
        self.with_output_weights(beta)
    }

    /// Total-least-squares output weights from the SVD of `[H Y]`.
    pub fn train_tls(&self, ts: &TrainingSet) -> Result<Self> {
        self.check_set(ts)?;
        let h = self.hidden_matrix(&ts.inputs)?;
        let beta = numerics::tls_solve(&h, &ts.targets)?;
        self.with_output_weights(beta)
    }

    /// Truncated TLS: singular directions of `[H Y]` below the noise floor
    /// implied by the least-squares residuals are discarded before solving.
    /// Returns the model and the truncation rank.
    pub fn train_tls_truncated(&self, ts: &TrainingSet) -> Result<(Self, usize)> {
        self.train_tls_truncated_ridge(ts, 0.0)
    }

    /// Truncated TLS on the ridge-augmented system `[H; sqrt(lambda) I]`,
    /// `[Y; 0]`. `lambda = 0` is plain truncated TLS.
    pub fn train_tls_truncated_ridge(
        &self,
        ts: &TrainingSet,
        lambda: f64,
    ) -> Result<(Self, usize)> {
        self.check_set(ts)?;
        if !(lambda >= 0.0) {
            return Err(Error::InvalidParameter(format!("ridge {lambda}")));
        }
        let mut h = self.hidden_matrix(&ts.inputs)?;
        let mut y = ts.targets.clone();
        if lambda > 0.0 {
            h = h.vcat(&RealMatrix::identity(self.hidden_count).scale(lambda.sqrt()))?;
            y = y.vcat(&RealMatrix::zeros(self.hidden_count, self.output_dim))?;
        }
        let residual = y.sub(&h.matmul(&numerics::solve_ls(&h, &y)?)?)?;
        let dof = (ts.len() * self.output_dim).max(1) as f64;
        let noise_std = residual.frobenius_norm() / dof.sqrt();
        let rank = numerics::tls_noise_rank(&h, &y, noise_std)?;
        let beta = numerics::tls_solve_truncated(&h, &y, rank)?;
        Ok((self.with_output_weights(beta)?, rank))
    }

    /// Precomputes `pinv(H)` for a fixed set of inputs so repeated training
    /// against different targets costs one matrix product.
    pub fn ls_projector(&self, inputs: &RealMatrix) -> Result<LsProjector> {
        self.ridge_projector(inputs, 0.0)
    }

    /// Cached form of [`ElmModel::train_ridge`]: the first `N` columns of
    /// `pinv([H; sqrt(lambda) I])`.
    pub fn ridge_projector(&self, inputs: &RealMatrix, lambda: f64) -> Result<LsProjector> {
        if !(lambda >= 0.0) {
            return Err(Error::InvalidParameter(format!("ridge {lambda}")));
        }
        let h = self.hidden_matrix(inputs)?;
        if lambda == 0.0 {
            return Ok(LsProjector {
                pinv: numerics::pinv_default(&h)?,
            });
        }
        let n = h.rows();
        let aug = h.vcat(&RealMatrix::identity(self.hidden_count).scale(lambda.sqrt()))?;
        Ok(LsProjector {
            pinv: numerics::pinv_default(&aug)?.block(0, 0, self.hidden_count, n),
        })
    }

    pub fn train_with_projector(
        &self,
        projector: &LsProjector,
        targets: &RealMatrix,
    ) -> Result<Self> {
        if targets.cols() != self.output_dim {
            return Err(Error::DimensionMismatch(format!(
                "targets of width {}, model expects {}",
                targets.cols(),
                self.output_dim
            )));
        }
        self.with_output_weights(projector.pinv.matmul(targets)?)
    }

    /// `psi = sum_i beta_i g(w_i . s + b_i)`.
    pub fn predict(&self, s: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.output_dim];
        let mut scratch = vec![0.0; self.hidden_count];
        self.predict_into(s, &mut scratch, &mut out)?;
        Ok(out)
    }

    /// Allocation-free prediction; `scratch` must have `L` entries.
    pub fn predict_into(&self, s: &[f64], scratch: &mut [f64], out: &mut [f64]) -> Result<()> {
        let beta = self.output_weights.as_ref().ok_or(Error::Untrained)?;
        if s.len() != self.input_dim || out.len() != self.output_dim {
            return Err(Error::DimensionMismatch(format!(
                "predict with input {} / output {}, model {}->{}",
                s.len(),
                out.len(),
                self.input_dim,
                self.output_dim
            )));
        }
        self.hidden_row(s, scratch);
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &h) in scratch.iter().enumerate() {
            for (o, &b) in out.iter_mut().zip(beta.row(i)) {
                *o += h * b;
            }
        }
        Ok(())
    }

    /// Predictions for every row of `inputs`.
    pub fn predict_batch(&self, inputs: &RealMatrix) -> Result<RealMatrix> {
        let beta = self.output_weights.as_ref().ok_or(Error::Untrained)?;
        self.hidden_matrix(inputs)?.matmul(beta)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s).map_err(|e| Error::Io(e.to_string()))?;
        if m.input_weights.shape() != (m.hidden_count, m.input_dim)
            || m.biases.len() != m.hidden_count
        {
            return Err(Error::DimensionMismatch("inconsistent ELM document".into()));
        }
        Ok(m)
    }
}

/// Cached least-squares (or ridge) projector for a fixed hidden layer and
/// input set.
#[derive(Debug, Clone)]
pub struct LsProjector {
    pinv: RealMatrix,
}

/// Root-mean-square error between predictions and targets over all entries.
pub fn rmse(pred: &RealMatrix, targets: &RealMatrix) -> Result<f64> {
    let d = pred.sub(targets)?;
    let n = (d.rows() * d.cols()).max(1) as f64;
    Ok((d.frobenius_norm().powi(2) / n).sqrt())
}

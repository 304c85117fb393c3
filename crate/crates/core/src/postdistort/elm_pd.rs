//! Non-iterative ELM post-distorter: `x_n ~ ELM([y_n, y_{n-1}, .., y_{n-M}])`.

use crate::coding::PamConstellation;
use crate::elm::{ElmModel, TrainingSet};
use crate::error::{Error, Result};
use crate::numerics::RealMatrix;

/// Causal windows `[y_n, y_{n-1}, .., y_{n-M}]` for every `n`, zeros before the start.
pub fn causal_windows(y: &[f64], memory: usize) -> RealMatrix {
    let mut s = RealMatrix::zeros(y.len(), memory + 1);
    for n in 0..y.len() {
        let row = s.row_mut(n);
        for (m, v) in row.iter_mut().enumerate() {
            if n >= m {
                *v = y[n - m];
            }
        }
    }
    s
}

/// Trained post-distorter plus the residual variance seen on its training data.
#[derive(Debug, Clone)]
pub struct ElmPostDistorter {
    pub model: ElmModel,
    pub memory: usize,
    pub training_mse: f64,
}

/// Trains `M+1 -> 1` output weights by least squares on `(y', x')`.
pub fn elm_pd_train(
    y_train: &[f64],
    x_train: &[f64],
    memory: usize,
    hidden: usize,
    seed: u64,
) -> Result<ElmPostDistorter> {
    if y_train.len() != x_train.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} received vs {} training symbols",
            y_train.len(),
            x_train.len()
        )));
    }
    if y_train.len() <= memory + 1 {
        return Err(Error::InvalidParameter(format!(
            "training length {} too short for window {}",
            y_train.len(),
            memory + 1
        )));
    }
    let inputs = causal_windows(y_train, memory);
    let targets = RealMatrix::column_vector(x_train);
    let ts = TrainingSet::new(inputs, targets)?;
    let model = ElmModel::new(memory + 1, 1, hidden, seed)?.train_ls(&ts)?;
    let pred = model.predict_batch(&ts.inputs)?;
    let training_mse = pred
        .as_slice()
        .iter()
        .zip(x_train)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / x_train.len() as f64;
    Ok(ElmPostDistorter {
        model,
        memory,
        training_mse,
    })
}

impl ElmPostDistorter {
    /// Soft estimates `x_hat_n` for every sample of `y`.
    pub fn estimate(&self, y: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .model
            .predict_batch(&causal_windows(y, self.memory))?
            .into_vec())
    }

    /// Estimates and nearest-level decisions.
    pub fn apply(&self, y: &[f64], c: &PamConstellation) -> Result<(Vec<f64>, Vec<usize>)> {
        let est = self.estimate(y)?;
        let idx = est.iter().map(|&v| c.nearest_index(v)).collect();
        Ok((est, idx))
    }
}

/// Convenience form of [`ElmPostDistorter::apply`].
pub fn elm_pd_apply(
    pd: &ElmPostDistorter,
    y: &[f64],
    c: &PamConstellation,
) -> Result<(Vec<f64>, Vec<usize>)> {
    pd.apply(y, c)
}

//! Receiver-side compensation of the LED nonlinearity: memory-polynomial
//! post-distorters, the non-iterative ELM post-distorter and the SISO
//! post-distorter used inside the turbo loop.

pub mod demap;
pub mod elm_pd;
pub mod poly;
pub mod siso;

pub use demap::gaussian_demap;
pub use elm_pd::{causal_windows, elm_pd_apply, elm_pd_train, ElmPostDistorter};
pub use poly::PolyPostDistorter;
pub use siso::{
    beliefs_from_llrs, channel_window_inputs, channel_windows, elm_channel_train,
    estimate_covariance, estimate_interference_mean, estimate_signal_table,
    genie_likelihood_params, siso_postdistort, CovarianceSource, DiagonalCovariance,
    LikelihoodParams, SisoElmPostDistorter, SisoOutput, SymbolBelief,
};

/// `poly_pd_train_ls` in function form.
pub fn poly_pd_train_ls(
    y: &[f64],
    x: &[f64],
    order: usize,
    memory: usize,
) -> crate::Result<PolyPostDistorter> {
    PolyPostDistorter::train_ls(y, x, order, memory)
}

/// Default `P(0) = I / delta` initialization for RLS.
pub const RLS_DEFAULT_DELTA: f64 = 1e-6;

pub fn poly_pd_train_rls(
    y: &[f64],
    x: &[f64],
    order: usize,
    memory: usize,
    forgetting: f64,
) -> crate::Result<PolyPostDistorter> {
    PolyPostDistorter::train_rls(y, x, order, memory, forgetting, RLS_DEFAULT_DELTA)
}

pub fn poly_pd_apply(pd: &PolyPostDistorter, y: &[f64]) -> Vec<f64> {
    pd.apply(y)
}

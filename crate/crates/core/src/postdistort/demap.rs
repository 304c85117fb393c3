//! Soft demapping of scalar symbol estimates into bit LLRs.

use crate::coding::{
    posterior_bit_llrs_from_log, symbol_log_priors, LlrFrame, LlrKind, PamConstellation,
};
use crate::error::{Error, Result};

/// Bit LLRs of `x_hat_n = x_n + e_n`, `e_n ~ N(0, variance)`, combined with
/// optional a-priori LLRs (`P` per estimate). The result is a-posteriori.
pub fn gaussian_demap(
    estimates: &[f64],
    variance: f64,
    a_priori: Option<&LlrFrame>,
    c: &PamConstellation,
) -> Result<LlrFrame> {
    if !(variance > 0.0) || !variance.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "demapper variance {variance}"
        )));
    }
    let bits = c.bits_per_symbol();
    if let Some(ap) = a_priori {
        if ap.len() != estimates.len() * bits {
            return Err(Error::DimensionMismatch(format!(
                "{} a-priori LLRs for {} estimates",
                ap.len(),
                estimates.len()
            )));
        }
    }
    let mut out = Vec::with_capacity(estimates.len() * bits);
    for (n, &x) in estimates.iter().enumerate() {
        let mut logp: Vec<f64> = c
            .levels()
            .iter()
            .map(|a| -(x - a) * (x - a) / (2.0 * variance))
            .collect();
        if let Some(ap) = a_priori {
            let lp = symbol_log_priors(&ap.values[n * bits..(n + 1) * bits], c);
            logp.iter_mut().zip(lp).for_each(|(v, p)| *v += p);
        }
        out.extend(posterior_bit_llrs_from_log(&logp, c));
    }
    Ok(LlrFrame::new(out, LlrKind::APosteriori))
}

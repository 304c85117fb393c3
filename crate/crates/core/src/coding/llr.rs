//! LLR frames and LLR/probability conversions.
//!
//! LLRs follow `ln p(c = 0) / p(c = 1)`.

use serde::{Deserialize, Serialize};

use crate::coding::PamConstellation;
use crate::error::{Error, Result};

pub const LLR_CLAMP: f64 = 30.0;
pub const PROB_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LlrKind {
    APriori,
    APosteriori,
    Extrinsic,
}

/// One LLR per coded bit, tagged with what it represents.
#[derive(Debug, Clone, PartialEq)]
pub struct LlrFrame {
    pub values: Vec<f64>,
    pub kind: LlrKind,
}

impl LlrFrame {
    /// Builds a frame, clamping every value to `[-LLR_CLAMP, LLR_CLAMP]`.
    pub fn new(values: Vec<f64>, kind: LlrKind) -> Self {
        let values = values.into_iter().map(clamp_llr).collect();
        Self { values, kind }
    }

    pub fn zeros(len: usize, kind: LlrKind) -> Self {
        Self {
            values: vec![0.0; len],
            kind,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same values under a different tag, e.g. an extrinsic frame becoming
    /// the a-priori input of the next block.
    pub fn retag(self, kind: LlrKind) -> Self {
        Self { kind, ..self }
    }

    pub fn hard_bits(&self) -> Vec<u8> {
        self.values.iter().map(|&l| u8::from(l < 0.0)).collect()
    }
}

/// Clamps to `[-LLR_CLAMP, LLR_CLAMP]`; NaN maps to 0.
#[inline]
pub fn clamp_llr(l: f64) -> f64 {
    if l.is_nan() {
        0.0
    } else {
        l.clamp(-LLR_CLAMP, LLR_CLAMP)
    }
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `ln(e^a + e^b)`.
#[inline]
pub fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

pub fn log_sum_exp(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(f64::NEG_INFINITY, log_add)
}

/// `ln p(c = bit)` for a bit with LLR `llr`.
#[inline]
pub fn bit_log_prob(llr: f64, bit: u8) -> f64 {
    if bit == 0 {
        -softplus(-llr)
    } else {
        -softplus(llr)
    }
}

/// Log prior of every symbol from the `P` a-priori LLRs of its label bits.
pub fn symbol_log_priors(llrs: &[f64], c: &PamConstellation) -> Vec<f64> {
    debug_assert_eq!(llrs.len(), c.bits_per_symbol());
    (0..c.size())
        .map(|i| {
            c.label(i)
                .iter()
                .zip(llrs)
                .map(|(&b, &l)| bit_log_prob(clamp_llr(l), b))
                .sum()
        })
        .collect()
}

/// Symbol prior probabilities from the `P` a-priori LLRs of one symbol.
pub fn symbol_priors_from_llrs(llrs: &[f64], c: &PamConstellation) -> Result<Vec<f64>> {
    if llrs.len() != c.bits_per_symbol() {
        return Err(Error::DimensionMismatch(format!(
            "{} LLRs for a {}-bit symbol",
            llrs.len(),
            c.bits_per_symbol()
        )));
    }
    Ok(normalize_log_probs(&symbol_log_priors(llrs, c)))
}

/// Exponentiates and normalizes log-probabilities.
pub fn normalize_log_probs(logp: &[f64]) -> Vec<f64> {
    let max = logp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = logp.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    p
}

/// Mean of the symbol under `priors`.
pub fn soft_symbol_mean(priors: &[f64], c: &PamConstellation) -> f64 {
    priors.iter().zip(c.levels()).map(|(p, a)| p * a).sum()
}

/// Variance of the symbol under `priors`.
pub fn soft_symbol_variance(priors: &[f64], c: &PamConstellation) -> f64 {
    let mean = soft_symbol_mean(priors, c);
    priors
        .iter()
        .zip(c.levels())
        .map(|(p, a)| p * (a - mean) * (a - mean))
        .sum()
}

/// A-posteriori LLRs of the label bits from log symbol posteriors (unnormalized is fine).
pub fn posterior_bit_llrs_from_log(log_post: &[f64], c: &PamConstellation) -> Vec<f64> {
    (0..c.bits_per_symbol())
        .map(|p| {
            let (mut zero, mut one) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
            for (i, &lp) in log_post.iter().enumerate() {
                if c.label(i)[p] == 0 {
                    zero = log_add(zero, lp);
                } else {
                    one = log_add(one, lp);
                }
            }
            zero - one
        })
        .collect()
}

/// Extrinsic LLRs of one symbol's label bits: posterior LLR minus a-priori LLR,
/// clamped. Posterior subset sums are floored at `PROB_FLOOR` before the log.
pub fn extrinsic_bit_llrs_symbol(
    posteriors: &[f64],
    a_priori: &[f64],
    c: &PamConstellation,
) -> Vec<f64> {
    (0..c.bits_per_symbol())
        .map(|p| {
            let (mut zero, mut one) = (0.0, 0.0);
            for (i, &pr) in posteriors.iter().enumerate() {
                if c.label(i)[p] == 0 {
                    zero += pr;
                } else {
                    one += pr;
                }
            }
            let post = zero.max(PROB_FLOOR).ln() - one.max(PROB_FLOOR).ln();
            clamp_llr(post - a_priori[p])
        })
        .collect()
}

/// Frame version of [`extrinsic_bit_llrs_symbol`]: `posteriors[n]` is the
/// symbol posterior of symbol `n`, `a_priori` holds `P` LLRs per symbol.
pub fn extrinsic_bit_llrs(
    posteriors: &[Vec<f64>],
    a_priori: &LlrFrame,
    c: &PamConstellation,
) -> Result<LlrFrame> {
    let bits = c.bits_per_symbol();
    if a_priori.len() != posteriors.len() * bits {
        return Err(Error::DimensionMismatch(format!(
            "{} a-priori LLRs for {} symbols of {bits} bits",
            a_priori.len(),
            posteriors.len()
        )));
    }
    let mut out = Vec::with_capacity(a_priori.len());
    for (n, post) in posteriors.iter().enumerate() {
        out.extend(extrinsic_bit_llrs_symbol(
            post,
            &a_priori.values[n * bits..(n + 1) * bits],
            c,
        ));
    }
    Ok(LlrFrame::new(out, LlrKind::Extrinsic))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pam8() -> PamConstellation {
        PamConstellation::new(3, 0.2, 1.0).unwrap()
    }

    #[test]
    fn zero_llrs_give_uniform_priors() {
        let p = symbol_priors_from_llrs(&[0.0; 3], &pam8()).unwrap();
        assert!(p.iter().all(|&v| (v - 0.125).abs() < 1e-15));
    }

    #[test]
    fn saturated_bit_kills_half_the_alphabet() {
        let c = pam8();
        let p = symbol_priors_from_llrs(&[30.0, 0.0, 0.0], &c).unwrap();
        for (i, &v) in p.iter().enumerate() {
            if c.label(i)[0] == 1 {
                assert!(v < 1e-12);
            } else {
                assert!((v - 0.25).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn priors_match_direct_product() {
        let c = pam8();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let llrs: Vec<f64> = (0..3).map(|_| rng.gen_range(-8.0..8.0)).collect();
            let p = symbol_priors_from_llrs(&llrs, &c).unwrap();
            let p0: Vec<f64> = llrs.iter().map(|l| 1.0 / (1.0 + (-l).exp())).collect();
            let direct: Vec<f64> = (0..8)
                .map(|i| {
                    c.label(i)
                        .iter()
                        .zip(&p0)
                        .map(|(&b, &q)| if b == 0 { q } else { 1.0 - q })
                        .product()
                })
                .collect();
            let total: f64 = direct.iter().sum();
            for (a, b) in p.iter().zip(&direct) {
                assert!((a - b / total).abs() < 1e-12);
            }
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn soft_mean_cases() {
        let c = pam8();
        let mut point = vec![0.0; 8];
        point[2] = 1.0;
        assert_eq!(soft_symbol_mean(&point, &c), c.levels()[2]);
        let uniform = vec![0.125; 8];
        let mean = c.levels().iter().sum::<f64>() / 8.0;
        assert!((soft_symbol_mean(&uniform, &c) - mean).abs() < 1e-15);
        assert_eq!(soft_symbol_variance(&point, &c), 0.0);
    }

    #[test]
    fn uniform_posterior_zero_prior_gives_zero_extrinsic() {
        let e = extrinsic_bit_llrs_symbol(&[0.125; 8], &[0.0; 3], &pam8());
        assert!(e.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn point_mass_extrinsic_sign_follows_label() {
        let c = pam8();
        for i in 0..8 {
            let mut post = vec![0.0; 8];
            post[i] = 1.0;
            let e = extrinsic_bit_llrs_symbol(&post, &[0.0; 3], &c);
            for (p, &v) in e.iter().enumerate() {
                assert_eq!(v > 0.0, c.label(i)[p] == 0);
                assert_eq!(v.abs(), LLR_CLAMP);
            }
        }
    }

    #[test]
    fn extrinsic_matches_subset_sums() {
        let c = pam8();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let raw: Vec<f64> = (0..8).map(|_| rng.gen_range(0.01..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let post: Vec<f64> = raw.iter().map(|v| v / total).collect();
            let prior: Vec<f64> = (0..3).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let e = extrinsic_bit_llrs_symbol(&post, &prior, &c);
            for p in 0..3 {
                let s0: f64 = (0..8)
                    .filter(|&i| c.label(i)[p] == 0)
                    .map(|i| post[i])
                    .sum();
                let s1: f64 = (0..8)
                    .filter(|&i| c.label(i)[p] == 1)
                    .map(|i| post[i])
                    .sum();
                assert!((e[p] - ((s0 / s1).ln() - prior[p])).abs() < 1e-9);
            }
            let logp: Vec<f64> = post.iter().map(|v| v.ln()).collect();
            let from_log = posterior_bit_llrs_from_log(&logp, &c);
            for p in 0..3 {
                assert!((from_log[p] - prior[p] - e[p]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn llr_round_trip_through_priors() {
        // Independent-bit priors: marginal bit LLRs recover the inputs.
        let c = pam8();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..50 {
            let llrs: Vec<f64> = (0..3).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let p = symbol_priors_from_llrs(&llrs, &c).unwrap();
            let back = extrinsic_bit_llrs_symbol(&p, &[0.0; 3], &c);
            for (a, b) in llrs.iter().zip(&back) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn frame_clamps_and_rejects_mismatch() {
        let f = LlrFrame::new(vec![100.0, -100.0, f64::NAN], LlrKind::APriori);
        assert_eq!(f.values, vec![30.0, -30.0, 0.0]);
        let c = pam8();
        assert!(
            extrinsic_bit_llrs(&[vec![0.125; 8]], &f.clone().retag(LlrKind::APriori), &c).is_ok()
        );
        let short = LlrFrame::zeros(2, LlrKind::APriori);
        assert!(extrinsic_bit_llrs(&[vec![0.125; 8]], &short, &c).is_err());
    }
}

//! Brute-force and closed-form reference computations.
//!
//! Each oracle here takes a route that shares no code with the
//! implementation it checks: exhaustive enumeration instead of trellis
//! recursions, closed-form Gaussian integrals instead of simulation.

use statrs::function::erf::erfc;

use crate::coding::{ConvCode, PamConstellation, LLR_CLAMP};

#[derive(Debug, Clone)]
pub struct MapReference {
    pub info_app: Vec<f64>,
    pub coded_app: Vec<f64>,
}

fn lse(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Exact bitwise MAP by enumerating every information word. LLRs are
/// clamped to the library's `LLR_CLAMP` range for comparison.
pub fn exhaustive_map(ch_llrs: &[f64], code: &ConvCode) -> MapReference {
    let coded_len = ch_llrs.len();
    let k = coded_len / 2 - code.tail_len();
    assert!(k <= 20, "exhaustive MAP is limited to 20 information bits");
    let mut info_buckets = vec![[Vec::new(), Vec::new()]; k];
    let mut coded_buckets = vec![[Vec::new(), Vec::new()]; coded_len];
    for word in 0u32..(1 << k) {
        let info: Vec<u8> = (0..k).map(|j| ((word >> j) & 1) as u8).collect();
        let cw = code.encode(&info);
        let w: f64 = cw
            .iter()
            .zip(ch_llrs)
            .map(|(&b, &l)| if b == 0 { 0.5 * l } else { -0.5 * l })
            .sum();
        for (j, &b) in info.iter().enumerate() {
            info_buckets[j][b as usize].push(w);
        }
        for (j, &b) in cw.iter().enumerate() {
            coded_buckets[j][b as usize].push(w);
        }
    }
    let llr = |b: &[Vec<f64>; 2]| (lse(&b[0]) - lse(&b[1])).clamp(-LLR_CLAMP, LLR_CLAMP);
    MapReference {
        info_app: info_buckets.iter().map(llr).collect(),
        coded_app: coded_buckets.iter().map(llr).collect(),
    }
}

/// Gaussian tail probability `Q(x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Exact bit error rate of equiprobable Gray-labelled PAM with nearest-level
/// detection on `y = x + w`, `w ~ N(0, sigma2)`.
///
/// Sums, for every transmitted level `i` and every decision region `j`,
/// the Gaussian mass of region `j` times the Hamming distance of the labels.
pub fn pam_gray_ber(c: &PamConstellation, sigma2: f64) -> f64 {
    let sigma = sigma2.sqrt();
    let levels = c.levels();
    let m = levels.len();
    let bounds: Vec<f64> = levels.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let mut total = 0.0;
    for i in 0..m {
        for j in 0..m {
            let lo = if j == 0 {
                f64::NEG_INFINITY
            } else {
                bounds[j - 1]
            };
            let hi = if j == m - 1 { f64::INFINITY } else { bounds[j] };
            let p_above = |t: f64| {
                if t.is_infinite() {
                    if t > 0.0 {
                        0.0
                    } else {
                        1.0
                    }
                } else {
                    q_function((t - levels[i]) / sigma)
                }
            };
            let mass = p_above(lo) - p_above(hi);
            let dist = c
                .label(i)
                .iter()
                .zip(c.label(j))
                .filter(|(a, b)| a != b)
                .count();
            total += mass * dist as f64;
        }
    }
    total / (m * c.bits_per_symbol()) as f64
}

/// Posterior over PAM levels for a memoryless channel `y = g(x) + w`:
/// `p_i ∝ prior_i exp(-(y - g(alpha_i))^2 / (2 sigma2))`.
pub fn awgn_pam_posterior(y: f64, outputs: &[f64], priors: &[f64], sigma2: f64) -> Vec<f64> {
    let logs: Vec<f64> = outputs
        .iter()
        .zip(priors)
        .map(|(&g, &p)| p.ln() - (y - g) * (y - g) / (2.0 * sigma2))
        .collect();
    let norm = lse(&logs);
    logs.iter().map(|l| (l - norm).exp()).collect()
}

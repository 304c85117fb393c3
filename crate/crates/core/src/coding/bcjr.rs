//! Log-domain BCJR (forward-backward) APP decoder for [`ConvCode`].

use crate::coding::conv::ConvCode;
use crate::coding::llr::{clamp_llr, log_add, LlrFrame, LlrKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BcjrOutput {
    /// Coded-bit extrinsic LLRs (a-posteriori minus input), clamped.
    pub coded_extrinsic: LlrFrame,
    /// Coded-bit a-posteriori LLRs, clamped.
    pub coded_app: LlrFrame,
    /// Information-bit a-posteriori LLRs (tail excluded), clamped.
    pub info_app: LlrFrame,
}

impl BcjrOutput {
    pub fn info_decisions(&self) -> Vec<u8> {
        self.info_app.hard_bits()
    }
}

/// Runs BCJR on `ch_llrs`, the a-priori LLRs of the coded bits in encoder
/// output order. Information bits carry no a-priori information.
pub fn bcjr_decode(ch_llrs: &LlrFrame, code: &ConvCode) -> Result<BcjrOutput> {
    let info_len = code.info_len(ch_llrs.len())?;
    let steps = ch_llrs.len() / 2;
    let ns = code.num_states();
    let neg_inf = f64::NEG_INFINITY;

    // Branch table: for state s and input u, (next, out0, out1).
    let branches: Vec<[(usize, u8, u8); 2]> = (0..ns)
        .map(|s| {
            let b0 = code.branch(s, 0);
            let b1 = code.branch(s, 1);
            [
                (b0.next, b0.out[0], b0.out[1]),
                (b1.next, b1.out[0], b1.out[1]),
            ]
        })
        .collect();

    // Branch metric for an output pair at step t: +-L/2 per bit.
    let metric = |t: usize, o0: u8, o1: u8| -> f64 {
        let l0 = ch_llrs.values[2 * t];
        let l1 = ch_llrs.values[2 * t + 1];
        let s0 = if o0 == 0 { 0.5 } else { -0.5 };
        let s1 = if o1 == 0 { 0.5 } else { -0.5 };
        s0 * l0 + s1 * l1
    };

    // Forward recursion, normalized so the best state sits at 0.
    let mut alpha = vec![neg_inf; (steps + 1) * ns];
    alpha[0] = 0.0;
    for t in 0..steps {
        let (cur, next) = alpha.split_at_mut((t + 1) * ns);
        let cur = &cur[t * ns..];
        let next = &mut next[..ns];
        for s in 0..ns {
            let a = cur[s];
            if a == neg_inf {
                continue;
            }
            for &(n, o0, o1) in &branches[s] {
                next[n] = log_add(next[n], a + metric(t, o0, o1));
            }
        }
        let max = next.iter().copied().fold(neg_inf, f64::max);
        next.iter_mut().for_each(|v| *v -= max);
    }

    // Backward recursion.
    let mut beta = vec![neg_inf; (steps + 1) * ns];
    if code.zero_tail {
        beta[steps * ns] = 0.0;
    } else {
        beta[steps * ns..].iter_mut().for_each(|v| *v = 0.0);
    }
    for t in (0..steps).rev() {
        let (cur, next) = beta.split_at_mut((t + 1) * ns);
        let cur = &mut cur[t * ns..];
        let next = &next[..ns];
        for s in 0..ns {
            let mut acc = neg_inf;
            for &(n, o0, o1) in &branches[s] {
                if next[n] != neg_inf {
                    acc = log_add(acc, next[n] + metric(t, o0, o1));
                }
            }
            cur[s] = acc;
        }
        let max = cur.iter().copied().fold(neg_inf, f64::max);
        cur.iter_mut().for_each(|v| *v -= max);
    }

    // A-posteriori LLRs. Per step, accumulate exp(term - max) into buckets.
    let mut info_app = Vec::with_capacity(info_len);
    let mut coded_app = Vec::with_capacity(2 * steps);
    let mut terms = Vec::with_capacity(2 * ns);
    for t in 0..steps {
        terms.clear();
        let a = &alpha[t * ns..(t + 1) * ns];
        let b = &beta[(t + 1) * ns..(t + 2) * ns];
        let mut max = neg_inf;
        for s in 0..ns {
            if a[s] == neg_inf {
                continue;
            }
            for (u, &(n, o0, o1)) in branches[s].iter().enumerate() {
                if b[n] == neg_inf {
                    continue;
                }
                let v = a[s] + metric(t, o0, o1) + b[n];
                max = max.max(v);
                terms.push((v, u as u8, o0, o1));
            }
        }
        let mut buckets = [[0.0f64; 2]; 3];
        for &(v, u, o0, o1) in &terms {
            let w = (v - max).exp();
            buckets[0][u as usize] += w;
            buckets[1][o0 as usize] += w;
            buckets[2][o1 as usize] += w;
        }
        let llr = |bk: [f64; 2]| -> f64 {
            match (bk[0] > 0.0, bk[1] > 0.0) {
                (true, true) => bk[0].ln() - bk[1].ln(),
                (true, false) => f64::INFINITY,
                (false, true) => f64::NEG_INFINITY,
                (false, false) => 0.0,
            }
        };
        if t < info_len {
            info_app.push(llr(buckets[0]));
        }
        coded_app.push(llr(buckets[1]));
        coded_app.push(llr(buckets[2]));
    }

    if coded_app.iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite("BCJR a-posteriori LLRs"));
    }
    let coded_extrinsic: Vec<f64> = coded_app
        .iter()
        .zip(&ch_llrs.values)
        .map(|(&app, &apr)| clamp_llr(app - apr))
        .collect();
    Ok(BcjrOutput {
        coded_extrinsic: LlrFrame::new(coded_extrinsic, LlrKind::Extrinsic),
        coded_app: LlrFrame::new(coded_app, LlrKind::APosteriori),
        info_app: LlrFrame::new(info_app, LlrKind::APosteriori),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verification::oracles::exhaustive_map;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_llrs_give_zero_information() {
        let code = ConvCode::default();
        let out = bcjr_decode(
            &LlrFrame::zeros(code.coded_len(20), LlrKind::APriori),
            &code,
        )
        .unwrap();
        assert!(out.info_app.values.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn confident_correct_llrs_decode_exactly() {
        let code = ConvCode::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let info: Vec<u8> = (0..200).map(|_| rng.gen_range(0..2)).collect();
        let coded = code.encode(&info);
        let llrs = coded
            .iter()
            .map(|&b| if b == 0 { 8.0 } else { -8.0 })
            .collect();
        let out = bcjr_decode(&LlrFrame::new(llrs, LlrKind::APriori), &code).unwrap();
        assert_eq!(out.info_decisions(), info);
    }

    #[test]
    fn matches_exhaustive_map_on_short_frames() {
        let code = ConvCode::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            let k = 8;
            let llrs: Vec<f64> = (0..code.coded_len(k))
                .map(|_| rng.gen_range(-4.0..4.0))
                .collect();
            let frame = LlrFrame::new(llrs, LlrKind::APriori);
            let out = bcjr_decode(&frame, &code).unwrap();
            let oracle = exhaustive_map(&frame.values, &code);
            for (a, b) in out.info_app.values.iter().zip(&oracle.info_app) {
                assert!((a - b).abs() < 1e-6, "{a} vs {b}");
            }
            for (a, b) in out.coded_app.values.iter().zip(&oracle.coded_app) {
                assert!((a - b).abs() < 1e-6, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn rejects_inconsistent_length() {
        let code = ConvCode::default();
        assert!(bcjr_decode(&LlrFrame::zeros(13, LlrKind::APriori), &code).is_err());
        assert!(bcjr_decode(&LlrFrame::zeros(10, LlrKind::APriori), &code).is_err());
    }

    #[test]
    fn extrinsic_is_app_minus_input() {
        let code = ConvCode::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let llrs: Vec<f64> = (0..code.coded_len(30))
            .map(|_| rng.gen_range(-2.0..2.0))
            .collect();
        let frame = LlrFrame::new(llrs, LlrKind::APriori);
        let out = bcjr_decode(&frame, &code).unwrap();
        for ((e, a), l) in out
            .coded_extrinsic
            .values
            .iter()
            .zip(&out.coded_app.values)
            .zip(&frame.values)
        {
            assert!((e - (a - l)).abs() < 1e-12);
        }
    }
}

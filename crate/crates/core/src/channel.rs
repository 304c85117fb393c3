//! Forward models of the LED nonlinearity with memory, plus AWGN.
//!
//! Symbols before the start of a sequence are taken to be zero.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// `z_n = sum_{k=1..K} sum_{m=0..M} a_{k,m} x_{n-m}^k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryPolynomialModel {
    /// `coeffs[m][k-1] = a_{k,m}`; every lag has `K` entries.
    coeffs: Vec<Vec<f64>>,
}

impl MemoryPolynomialModel {
    /// `coeffs[m]` lists `a_{1,m} .. a_{K,m}` for lag `m`.
    pub fn new(coeffs: Vec<Vec<f64>>) -> Result<Self> {
        let order = coeffs.first().map_or(0, Vec::len);
        if order == 0 {
            return Err(Error::InvalidParameter(
                "memory polynomial needs K >= 1 and at least lag 0".into(),
            ));
        }
        if coeffs.iter().any(|c| c.len() != order) {
            return Err(Error::DimensionMismatch(
                "every lag needs K coefficients".into(),
            ));
        }
        if coeffs.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("memory polynomial coefficients"));
        }
        Ok(Self { coeffs })
    }

    pub fn coeffs(&self) -> &[Vec<f64>] {
        &self.coeffs
    }

    pub fn order(&self) -> usize {
        self.coeffs[0].len()
    }

    pub fn memory(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, k: usize, m: usize) -> f64 {
        self.coeffs[m][k - 1]
    }

    pub fn lag_coeffs(&self, m: usize) -> &[f64] {
        &self.coeffs[m]
    }

    /// `sum_k a_{k,m} x^k`, the contribution of one symbol through lag `m`.
    #[inline]
    pub fn lag_response(&self, m: usize, x: f64) -> f64 {
        poly_no_constant(&self.coeffs[m], x)
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; x.len()];
        for (m, _) in self.coeffs.iter().enumerate() {
            for n in m..x.len() {
                z[n] += self.lag_response(m, x[n - m]);
            }
        }
        z
    }
}

/// `sum_{k>=1} c[k-1] x^k` by Horner's rule.
#[inline]
fn poly_no_constant(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| (acc + a) * x)
}

/// Static polynomial followed by the FIR filter `1 + rho_1 z^-1 + rho_2 z^-2 + ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HammersteinModel {
    /// `a_1 .. a_K`.
    pub static_coeffs: Vec<f64>,
    /// `rho_1 .. rho_M`.
    pub taps: Vec<f64>,
}

impl HammersteinModel {
    pub fn new(static_coeffs: Vec<f64>, taps: Vec<f64>) -> Result<Self> {
        if static_coeffs.iter().all(|&a| a == 0.0) {
            return Err(Error::InvalidParameter(
                "Hammerstein model needs a nonzero static coefficient".into(),
            ));
        }
        if static_coeffs.iter().chain(&taps).any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("Hammerstein coefficients"));
        }
        Ok(Self {
            static_coeffs,
            taps,
        })
    }

    pub fn memory(&self) -> usize {
        self.taps.len()
    }

    pub fn static_response(&self, x: f64) -> f64 {
        poly_no_constant(&self.static_coeffs, x)
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let v: Vec<f64> = x.iter().map(|&xi| self.static_response(xi)).collect();
        (0..x.len())
            .map(|n| {
                let mut z = v[n];
                for (m, &rho) in self.taps.iter().enumerate() {
                    if n > m {
                        z += rho * v[n - m - 1];
                    }
                }
                z
            })
            .collect()
    }

    /// Equivalent memory polynomial with `a_{k,m} = a_k rho_m`, `rho_0 = 1`.
    pub fn to_memory_polynomial(&self) -> MemoryPolynomialModel {
        let coeffs = std::iter::once(1.0)
            .chain(self.taps.iter().copied())
            .map(|rho| self.static_coeffs.iter().map(|a| a * rho).collect())
            .collect();
        MemoryPolynomialModel { coeffs }
    }
}

/// Static LED drive-to-output curve: polynomial evaluated on the drive
/// clamped to `[lo, hi]`. `coeffs[k]` multiplies `drive^k` (constant first).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedCurve {
    pub coeffs: Vec<f64>,
    pub lo: f64,
    pub hi: f64,
}

impl LedCurve {
    pub fn new(coeffs: Vec<f64>, lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidParameter(format!("clip bounds [{lo}, {hi}]")));
        }
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(
                "LED curve needs finite coefficients".into(),
            ));
        }
        Ok(Self { coeffs, lo, hi })
    }

    pub fn eval(&self, drive: f64) -> f64 {
        static_led_curve(drive, self)
    }

    /// Coefficients `a_1 .. a_K` without the constant term, for use as a
    /// Hammerstein static block inside the clip range.
    pub fn polynomial_part(&self) -> Vec<f64> {
        self.coeffs[1..].to_vec()
    }
}

/// Polynomial evaluated on `drive` clamped to the curve's bounds.
pub fn static_led_curve(drive: f64, curve: &LedCurve) -> f64 {
    let d = drive.clamp(curve.lo, curve.hi);
    curve.coeffs.iter().rev().fold(0.0, |acc, &c| acc * d + c)
}

/// Any supported channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ChannelModel {
    MemoryPolynomial(MemoryPolynomialModel),
    Hammerstein(HammersteinModel),
    /// Memoryless clamped curve.
    Static(LedCurve),
}

impl ChannelModel {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            ChannelModel::MemoryPolynomial(m) => m.apply(x),
            ChannelModel::Hammerstein(h) => h.apply(x),
            ChannelModel::Static(c) => x.iter().map(|&d| c.eval(d)).collect(),
        }
    }

    pub fn memory(&self) -> usize {
        match self {
            ChannelModel::MemoryPolynomial(m) => m.memory(),
            ChannelModel::Hammerstein(h) => h.memory(),
            ChannelModel::Static(_) => 0,
        }
    }

    /// Memory-polynomial form, when one exists. A static curve qualifies only
    /// without a constant term, and the clamps are ignored (valid for drives
    /// inside the clip range).
    pub fn as_memory_polynomial(&self) -> Result<MemoryPolynomialModel> {
        match self {
            ChannelModel::MemoryPolynomial(m) => Ok(m.clone()),
            ChannelModel::Hammerstein(h) => Ok(h.to_memory_polynomial()),
            ChannelModel::Static(c) => {
                if c.coeffs[0] != 0.0 {
                    return Err(Error::InvalidParameter(
                        "static curve with a constant term has no memory-polynomial form".into(),
                    ));
                }
                MemoryPolynomialModel::new(vec![c.polynomial_part()])
            }
        }
    }
}

/// Received samples with the noise variance that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisySignal {
    pub samples: Vec<f64>,
    pub noise_variance: f64,
}

/// `sigma^2 = mean(z^2) / 10^(snr_db / 10)`.
pub fn noise_variance_for(z: &[f64], snr_db: f64) -> Result<f64> {
    if z.is_empty() {
        return Err(Error::InvalidParameter("empty signal".into()));
    }
    let power = z.iter().map(|v| v * v).sum::<f64>() / z.len() as f64;
    if power == 0.0 {
        return Err(Error::ZeroSignalPower);
    }
    Ok(power / 10f64.powf(snr_db / 10.0))
}

/// Adds white Gaussian noise of the given variance from `rng`.
pub fn add_noise<R: Rng>(z: &[f64], noise_variance: f64, rng: &mut R) -> NoisySignal {
    let sigma = noise_variance.sqrt();
    let samples = z
        .iter()
        .map(|&v| {
            let w: f64 = rng.sample(StandardNormal);
            v + sigma * w
        })
        .collect();
    NoisySignal {
        samples,
        noise_variance,
    }
}

/// AWGN at `snr_db` defined as `E(z^2) / sigma^2`, from a stream keyed by `seed`.
pub fn add_awgn(z: &[f64], snr_db: f64, seed: u64) -> Result<NoisySignal> {
    let var = noise_variance_for(z, snr_db)?;
    Ok(add_noise(z, var, &mut rng::stream(seed)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive_mp(coeffs: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        (0..x.len())
            .map(|n| {
                let mut z = 0.0;
                for (m, lag) in coeffs.iter().enumerate() {
                    for (k, a) in lag.iter().enumerate() {
                        let xi = if n >= m { x[n - m] } else { 0.0 };
                        z += a * xi.powi(k as i32 + 1);
                    }
                }
                z
            })
            .collect()
    }

    #[test]
    fn linear_memoryless_is_identity() {
        let m = MemoryPolynomialModel::new(vec![vec![1.0]]).unwrap();
        assert_eq!(m.apply(&[0.3, -1.0, 2.0]), vec![0.3, -1.0, 2.0]);
    }

    #[test]
    fn quadratic_direct_evaluation() {
        let m = MemoryPolynomialModel::new(vec![vec![1.0, 0.5]]).unwrap();
        assert_eq!(m.apply(&[2.0]), vec![4.0]);
    }

    #[test]
    fn mp_matches_naive_double_loop() {
        let mut r = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let coeffs: Vec<Vec<f64>> = (0..4)
                .map(|_| (0..5).map(|_| r.gen_range(-1.0..1.0)).collect())
                .collect();
            let x: Vec<f64> = (0..50).map(|_| r.gen_range(0.0..1.2)).collect();
            let m = MemoryPolynomialModel::new(coeffs.clone()).unwrap();
            for (a, b) in m.apply(&x).iter().zip(naive_mp(&coeffs, &x)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hammerstein_zero_taps_is_static() {
        let h = HammersteinModel::new(vec![0.5, 0.2, -0.1], vec![0.0, 0.0]).unwrap();
        let x = [0.2, 0.6, 1.0];
        for (z, &xi) in h.apply(&x).iter().zip(&x) {
            assert_eq!(*z, 0.5 * xi + 0.2 * xi * xi - 0.1 * xi * xi * xi);
        }
    }

    #[test]
    fn hammerstein_linear_fir() {
        let h = HammersteinModel::new(vec![1.0], vec![0.15, 0.05]).unwrap();
        let z = h.apply(&[1.0, 2.0, 3.0, 4.0]);
        let expect = [1.0, 2.0 + 0.15, 3.0 + 0.3 + 0.05, 4.0 + 0.45 + 0.1];
        for (a, b) in z.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn hammerstein_rejects_all_zero_static() {
        assert!(HammersteinModel::new(vec![0.0, 0.0], vec![0.15]).is_err());
    }

    #[test]
    fn led_curve_clamps() {
        let c = LedCurve::new(vec![0.0, 1.0, 1.0], 0.1, 1.0).unwrap();
        assert_eq!(c.eval(-3.0), c.eval(0.1));
        assert_eq!(c.eval(5.0), c.eval(1.0));
        assert!(LedCurve::new(vec![1.0], 1.0, 1.0).is_err());
    }

    #[test]
    fn awgn_extreme_snr_is_transparent() {
        let z: Vec<f64> = (0..100).map(|i| 0.2 + 0.008 * i as f64).collect();
        let y = add_awgn(&z, 300.0, 3).unwrap();
        for (a, b) in y.samples.iter().zip(&z) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn awgn_zero_db_variance_is_power() {
        let z = vec![0.5, -0.5, 1.0, -1.0];
        let y = add_awgn(&z, 0.0, 1).unwrap();
        assert!((y.noise_variance - 0.625).abs() < 1e-15);
    }

    #[test]
    fn awgn_rejects_zero_signal() {
        assert_eq!(add_awgn(&[0.0; 10], 10.0, 1), Err(Error::ZeroSignalPower));
    }

    #[test]
    fn awgn_empirical_variance() {
        let z = vec![1.0; 1_000_000];
        let y = add_awgn(&z, 10.0, 99).unwrap();
        let emp = y.samples.iter().map(|v| (v - 1.0) * (v - 1.0)).sum::<f64>() / z.len() as f64;
        assert!(
            (emp / y.noise_variance - 1.0).abs() < 0.01,
            "{emp} vs {}",
            y.noise_variance
        );
        assert_eq!(
            add_awgn(&z[..100], 10.0, 99).unwrap().samples,
            y.samples[..100].to_vec()
        );
    }

    proptest! {
        #[test]
        fn hammerstein_equals_expanded_mp(
            a in proptest::collection::vec(-1.0f64..1.0, 1..5usize),
            taps in proptest::collection::vec(-0.5f64..0.5, 0..4usize),
            x in proptest::collection::vec(0.0f64..1.2, 1..40usize),
        ) {
            prop_assume!(a.iter().any(|&v| v != 0.0));
            let h = HammersteinModel::new(a, taps).unwrap();
            let mp = h.to_memory_polynomial();
            for (u, v) in h.apply(&x).iter().zip(mp.apply(&x)) {
                prop_assert!((u - v).abs() < 1e-12);
            }
        }

        #[test]
        fn causal(x in proptest::collection::vec(0.0f64..1.2, 2..30usize), j in 0usize..30, bump in 0.1f64..1.0) {
            let h = HammersteinModel::new(vec![0.3, 1.2, -0.4], vec![0.15, 0.05]).unwrap();
            let j = j % x.len();
            let mut x2 = x.clone();
            x2[j] += bump;
            let (z1, z2) = (h.apply(&x), h.apply(&x2));
            prop_assert_eq!(&z1[..j], &z2[..j]);
        }

        #[test]
        fn linear_models_commute_with_scaling(x in proptest::collection::vec(-1.0f64..1.0, 1..30usize), c in -3.0f64..3.0) {
            let m = MemoryPolynomialModel::new(vec![vec![0.9], vec![0.2], vec![-0.1]]).unwrap();
            let scaled: Vec<f64> = x.iter().map(|v| c * v).collect();
            for (a, b) in m.apply(&scaled).iter().zip(m.apply(&x)) {
                prop_assert!((a - c * b).abs() < 1e-12);
            }
        }
    }
}

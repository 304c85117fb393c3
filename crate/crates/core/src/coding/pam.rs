use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unipolar `2^P`-ary PAM alphabet with reflected-Gray labels.
///
/// Level `i` (levels sorted ascending) carries the Gray code `i ^ (i >> 1)`;
/// label bit `j` is bit `j` of that code, so the first bit of each `P`-bit
/// group is the least significant one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PamConstellation {
    bits_per_symbol: usize,
    levels: Vec<f64>,
    labels: Vec<Vec<u8>>,
}

impl PamConstellation {
    /// `2^bits` equally spaced levels on `[lo, hi]`.
    pub fn new(bits_per_symbol: usize, lo: f64, hi: f64) -> Result<Self> {
        if bits_per_symbol == 0 || bits_per_symbol > 16 {
            return Err(Error::InvalidParameter(format!(
                "bits per symbol {bits_per_symbol}"
            )));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidParameter(format!(
                "drive interval [{lo}, {hi}]"
            )));
        }
        let size = 1usize << bits_per_symbol;
        let step = (hi - lo) / (size - 1) as f64;
        let levels = (0..size).map(|i| lo + step * i as f64).collect();
        Self::with_levels(bits_per_symbol, levels)
    }

    /// Arbitrary strictly increasing levels with reflected-Gray labels.
    pub fn with_levels(bits_per_symbol: usize, levels: Vec<f64>) -> Result<Self> {
        if levels.len() != 1 << bits_per_symbol {
            return Err(Error::InvalidParameter(format!(
                "{} levels for {bits_per_symbol} bits per symbol",
                levels.len()
            )));
        }
        if !levels.windows(2).all(|w| w[0] < w[1]) || !levels.iter().all(|l| l.is_finite()) {
            return Err(Error::InvalidParameter(
                "levels must be finite and strictly increasing".into(),
            ));
        }
        let labels = (0..levels.len())
            .map(|i| {
                let gray = i ^ (i >> 1);
                (0..bits_per_symbol)
                    .map(|j| ((gray >> j) & 1) as u8)
                    .collect()
            })
            .collect();
        Ok(Self {
            bits_per_symbol,
            levels,
            labels,
        })
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    pub fn size(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn label(&self, i: usize) -> &[u8] {
        &self.labels[i]
    }

    pub fn mean_level(&self) -> f64 {
        self.levels.iter().sum::<f64>() / self.size() as f64
    }

    /// Index of the level whose label equals `bits`.
    pub fn index_of_label(&self, bits: &[u8]) -> usize {
        let gray = bits
            .iter()
            .enumerate()
            .fold(0usize, |g, (j, &b)| g | ((b as usize & 1) << j));
        // Inverse reflected Gray code.
        let mut i = gray;
        let mut shift = gray >> 1;
        while shift != 0 {
            i ^= shift;
            shift >>= 1;
        }
        i
    }

    /// Maps consecutive `P`-bit groups to levels.
    pub fn map(&self, bits: &[u8]) -> Result<Vec<f64>> {
        let p = self.bits_per_symbol;
        if bits.len() % p != 0 {
            return Err(Error::DimensionMismatch(format!(
                "{} bits is not a multiple of {p}",
                bits.len()
            )));
        }
        Ok(bits
            .chunks(p)
            .map(|g| self.levels[self.index_of_label(g)])
            .collect())
    }

    pub fn map_indices(&self, bits: &[u8]) -> Result<Vec<usize>> {
        let p = self.bits_per_symbol;
        if bits.len() % p != 0 {
            return Err(Error::DimensionMismatch(format!(
                "{} bits is not a multiple of {p}",
                bits.len()
            )));
        }
        Ok(bits.chunks(p).map(|g| self.index_of_label(g)).collect())
    }

    /// Nearest level; ties go to the lower level.
    pub fn nearest_index(&self, y: f64) -> usize {
        let mut best = 0;
        let mut best_d = (y - self.levels[0]).abs();
        for (i, &l) in self.levels.iter().enumerate().skip(1) {
            let d = (y - l).abs();
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }

    /// Hard decisions back to label bits.
    pub fn demap_hard(&self, y: &[f64]) -> Vec<u8> {
        y.iter()
            .flat_map(|&v| self.labels[self.nearest_index(v)].iter().copied())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn binary_alphabet_maps_bit_to_level() {
        let c = PamConstellation::new(1, 0.0, 1.0).unwrap();
        assert_eq!(c.map(&[0, 1, 1, 0]).unwrap(), vec![0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn all_zero_label_is_lowest_level() {
        let c = PamConstellation::new(3, 0.2, 1.0).unwrap();
        assert_eq!(c.map(&[0, 0, 0]).unwrap(), vec![0.2]);
        assert_eq!(c.label(0), &[0, 0, 0]);
    }

    #[test]
    fn gray_property_holds() {
        for p in 1..=3 {
            let c = PamConstellation::new(p, 0.0, 1.0).unwrap();
            for i in 1..c.size() {
                let diff = c
                    .label(i)
                    .iter()
                    .zip(c.label(i - 1))
                    .filter(|(a, b)| a != b)
                    .count();
                assert_eq!(diff, 1, "P={p} levels {i}-1/{i}");
            }
            let mut seen: Vec<&[u8]> = (0..c.size()).map(|i| c.label(i)).collect();
            seen.sort();
            seen.dedup();
            assert_eq!(seen.len(), c.size());
        }
    }

    #[test]
    fn rejects_non_divisible_length() {
        let c = PamConstellation::new(3, 0.2, 1.0).unwrap();
        assert!(matches!(c.map(&[0, 1]), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn ties_go_to_lower_level() {
        let c = PamConstellation::new(1, 0.0, 1.0).unwrap();
        assert_eq!(c.nearest_index(0.5), 0);
    }

    proptest! {
        #[test]
        fn map_then_hard_demap_is_identity(bits in proptest::collection::vec(0u8..2, 0..40usize)) {
            let c = PamConstellation::new(3, 0.2, 1.0).unwrap();
            let n = bits.len() / 3 * 3;
            let bits = &bits[..n];
            let sym = c.map(bits).unwrap();
            prop_assert_eq!(c.demap_hard(&sym), bits.to_vec());
        }
    }
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rate-1/2 feedforward convolutional code.
///
/// Generators are written in octal with the most significant bit tapping
/// the current input, so `0o171`/`0o133` is the usual constraint-length-7
/// pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvCode {
    pub generators: [u32; 2],
    pub constraint_length: usize,
    pub zero_tail: bool,
}

impl Default for ConvCode {
    fn default() -> Self {
        Self {
            generators: [0o171, 0o133],
            constraint_length: 7,
            zero_tail: true,
        }
    }
}

/// One trellis branch leaving a state.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Branch {
    pub next: usize,
    pub out: [u8; 2],
}

impl ConvCode {
    pub fn new(generators: [u32; 2], constraint_length: usize, zero_tail: bool) -> Result<Self> {
        if !(2..=16).contains(&constraint_length) {
            return Err(Error::InvalidParameter(format!(
                "constraint length {constraint_length}"
            )));
        }
        for g in generators {
            if g == 0 || g >= 1 << constraint_length {
                return Err(Error::InvalidParameter(format!(
                    "generator {g:o} does not fit constraint length {constraint_length}"
                )));
            }
        }
        Ok(Self {
            generators,
            constraint_length,
            zero_tail,
        })
    }

    pub fn memory(&self) -> usize {
        self.constraint_length - 1
    }

    pub fn num_states(&self) -> usize {
        1 << self.memory()
    }

    pub fn tail_len(&self) -> usize {
        if self.zero_tail {
            self.memory()
        } else {
            0
        }
    }

    /// Number of coded bits for `info_len` information bits.
    pub fn coded_len(&self, info_len: usize) -> usize {
        2 * (info_len + self.tail_len())
    }

    /// Number of information bits carried by `coded_len` coded bits.
    pub fn info_len(&self, coded_len: usize) -> Result<usize> {
        if coded_len % 2 != 0 || coded_len / 2 < self.tail_len() {
            return Err(Error::DimensionMismatch(format!(
                "{coded_len} coded bits do not fit the code"
            )));
        }
        Ok(coded_len / 2 - self.tail_len())
    }

    /// Branch taken from `state` on input `bit`. The state holds the last
    /// `K-1` inputs, most recent in the highest bit.
    #[inline]
    pub(crate) fn branch(&self, state: usize, bit: u8) -> Branch {
        let reg = ((bit as usize) << self.memory()) | state;
        let parity = |g: u32| ((reg as u32 & g).count_ones() & 1) as u8;
        Branch {
            next: reg >> 1,
            out: [parity(self.generators[0]), parity(self.generators[1])],
        }
    }

    pub fn encode(&self, info: &[u8]) -> Vec<u8> {
        self.encode_with_state(info).0
    }

    /// Encodes and also reports the final register state.
    pub fn encode_with_state(&self, info: &[u8]) -> (Vec<u8>, usize) {
        let mut out = Vec::with_capacity(self.coded_len(info.len()));
        let mut state = 0usize;
        let tail = std::iter::repeat(0u8).take(self.tail_len());
        for bit in info.iter().map(|b| b & 1).chain(tail) {
            let br = self.branch(state, bit);
            out.extend_from_slice(&br.out);
            state = br.next;
        }
        (out, state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn all_zero_input_encodes_to_zero() {
        let c = ConvCode::default();
        let out = c.encode(&[0; 20]);
        assert_eq!(out.len(), 52);
        assert!(out.iter().all(|&b| b == 0));
    }

    #[test]
    fn impulse_response_is_generator_taps() {
        let c = ConvCode::default();
        let mut info = vec![0u8; 7];
        info[0] = 1;
        let out = c.encode(&info);
        let g0: Vec<u8> = out.iter().step_by(2).take(7).copied().collect();
        let g1: Vec<u8> = out.iter().skip(1).step_by(2).take(7).copied().collect();
        // 171 = 1 111 001, 133 = 1 011 011
        assert_eq!(g0, vec![1, 1, 1, 1, 0, 0, 1]);
        assert_eq!(g1, vec![1, 0, 1, 1, 0, 1, 1]);
    }

    #[test]
    fn rejects_bad_generators() {
        assert!(ConvCode::new([0, 0o133], 7, true).is_err());
        assert!(ConvCode::new([0o400, 0o133], 7, true).is_err());
    }

    #[test]
    fn info_len_round_trip() {
        let c = ConvCode::default();
        assert_eq!(c.info_len(c.coded_len(1024)).unwrap(), 1024);
        assert!(c.info_len(11).is_err());
        assert!(c.info_len(10).is_err());
    }

    proptest! {
        #[test]
        fn linearity(u in proptest::collection::vec(0u8..2, 1..64usize), seed in any::<u64>()) {
            let c = ConvCode::default();
            let v: Vec<u8> = u.iter().enumerate().map(|(i, _)| ((seed >> (i % 64)) & 1) as u8).collect();
            let x: Vec<u8> = u.iter().zip(&v).map(|(a, b)| a ^ b).collect();
            let lhs = c.encode(&x);
            let rhs: Vec<u8> = c.encode(&u).iter().zip(c.encode(&v)).map(|(a, b)| a ^ b).collect();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn zero_tail_ends_in_state_zero(u in proptest::collection::vec(0u8..2, 0..100usize)) {
            let (_, state) = ConvCode::default().encode_with_state(&u);
            prop_assert_eq!(state, 0);
        }
    }
}

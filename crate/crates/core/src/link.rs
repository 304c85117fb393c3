//! Bit-level frame layout shared by the transmitter and every receiver:
//! encode, interleave, pad to whole symbols, map.
//!
//! The coded length is generally not a multiple of the bits per symbol, so
//! zero bits are appended after interleaving. Receivers know those bits and
//! give them a saturated a-priori LLR; their output LLRs are dropped before
//! the decoder.

use crate::coding::{ConvCode, Interleaver, LlrFrame, LlrKind, PamConstellation, LLR_CLAMP};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct LinkLayout {
    pub code: ConvCode,
    pub interleaver: Interleaver,
    pub constellation: PamConstellation,
    pub info_bits: usize,
}

/// Everything the transmitter produced for one frame.
#[derive(Debug, Clone)]
pub struct TxFrame {
    pub info: Vec<u8>,
    /// Interleaved coded bits plus padding, in transmission order.
    pub bits: Vec<u8>,
    pub symbol_indices: Vec<usize>,
    pub symbols: Vec<f64>,
}

impl LinkLayout {
    /// Layout with an interleaver keyed by `interleaver_seed`.
    pub fn new(
        code: ConvCode,
        constellation: PamConstellation,
        info_bits: usize,
        interleaver_seed: u64,
    ) -> Result<Self> {
        if info_bits == 0 {
            return Err(Error::InvalidParameter(
                "frames need at least one information bit".into(),
            ));
        }
        let interleaver = Interleaver::random(code.coded_len(info_bits), interleaver_seed);
        Ok(Self {
            code,
            interleaver,
            constellation,
            info_bits,
        })
    }

    pub fn coded_len(&self) -> usize {
        self.code.coded_len(self.info_bits)
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.constellation.bits_per_symbol()
    }

    pub fn data_symbols(&self) -> usize {
        self.coded_len().div_ceil(self.bits_per_symbol())
    }

    pub fn padded_len(&self) -> usize {
        self.data_symbols() * self.bits_per_symbol()
    }

    pub fn pad_len(&self) -> usize {
        self.padded_len() - self.coded_len()
    }

    pub fn transmit(&self, info: &[u8]) -> Result<TxFrame> {
        if info.len() != self.info_bits {
            return Err(Error::DimensionMismatch(format!(
                "{} information bits for a frame of {}",
                info.len(),
                self.info_bits
            )));
        }
        let mut bits = self.interleaver.interleave(&self.code.encode(info))?;
        bits.resize(self.padded_len(), 0);
        let symbol_indices = self.constellation.map_indices(&bits)?;
        let symbols = symbol_indices
            .iter()
            .map(|&i| self.constellation.levels()[i])
            .collect();
        Ok(TxFrame {
            info: info.to_vec(),
            bits,
            symbol_indices,
            symbols,
        })
    }

    /// A-priori LLRs before any decoder feedback: zero for coded bits,
    /// saturated towards 0 for the padding.
    pub fn initial_priors(&self) -> LlrFrame {
        let mut v = vec![0.0; self.padded_len()];
        v[self.coded_len()..]
            .iter_mut()
            .for_each(|l| *l = LLR_CLAMP);
        LlrFrame::new(v, LlrKind::APriori)
    }

    /// Demapper-side LLRs (padded, interleaved order) to decoder input:
    /// drops the padding and deinterleaves.
    pub fn to_decoder(&self, llrs: &LlrFrame) -> Result<LlrFrame> {
        if llrs.kind == LlrKind::APriori {
            return Err(Error::InvalidParameter(
                "a-priori LLRs cannot be fed to the decoder".into(),
            ));
        }
        self.check_padded(llrs)?;
        let values = self
            .interleaver
            .deinterleave(&llrs.values[..self.coded_len()])?;
        Ok(LlrFrame::new(values, LlrKind::APriori))
    }

    /// Decoder extrinsic LLRs (code order) to demapper priors: interleaves
    /// and restores the padding priors.
    pub fn from_decoder(&self, extrinsic: &LlrFrame) -> Result<LlrFrame> {
        if extrinsic.kind != LlrKind::Extrinsic {
            return Err(Error::InvalidParameter(format!(
                "decoder feedback tagged {:?}, expected extrinsic",
                extrinsic.kind
            )));
        }
        self.padded_from_code_order(&extrinsic.values, LlrKind::APriori)
    }

    /// Code-order LLRs to padded transmission order with the padding saturated.
    pub fn padded_from_code_order(&self, llrs: &[f64], kind: LlrKind) -> Result<LlrFrame> {
        let mut v = self.interleaver.interleave(llrs)?;
        v.resize(self.padded_len(), LLR_CLAMP);
        Ok(LlrFrame::new(v, kind))
    }

    fn check_padded(&self, llrs: &LlrFrame) -> Result<()> {
        if llrs.len() != self.padded_len() {
            return Err(Error::DimensionMismatch(format!(
                "{} LLRs for a padded frame of {}",
                llrs.len(),
                self.padded_len()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coding::bcjr_decode;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn layout() -> LinkLayout {
        LinkLayout::new(
            ConvCode::default(),
            PamConstellation::new(3, 0.2, 1.0).unwrap(),
            1024,
            5,
        )
        .unwrap()
    }

    #[test]
    fn lengths() {
        let l = layout();
        assert_eq!(l.coded_len(), 2060);
        assert_eq!(l.data_symbols(), 687);
        assert_eq!(l.pad_len(), 1);
    }

    #[test]
    fn noiseless_round_trip() {
        let l = layout();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let info: Vec<u8> = (0..1024).map(|_| rng.gen_range(0..2)).collect();
        let tx = l.transmit(&info).unwrap();
        assert_eq!(tx.symbols.len(), 687);
        assert_eq!(*tx.bits.last().unwrap(), 0);
        let llrs = tx
            .bits
            .iter()
            .map(|&b| if b == 0 { 5.0 } else { -5.0 })
            .collect();
        let dec_in = l
            .to_decoder(&LlrFrame::new(llrs, LlrKind::Extrinsic))
            .unwrap();
        let out = bcjr_decode(&dec_in, &l.code).unwrap();
        assert_eq!(out.info_decisions(), info);
        let back = l.from_decoder(&out.coded_extrinsic).unwrap();
        assert_eq!(back.kind, LlrKind::APriori);
        assert_eq!(back.values[2060], LLR_CLAMP);
    }

    #[test]
    fn kind_tags_are_enforced() {
        let l = layout();
        assert!(l.to_decoder(&l.initial_priors()).is_err());
        assert!(l
            .from_decoder(&LlrFrame::zeros(2060, LlrKind::APosteriori))
            .is_err());
    }
}

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng;

/// Bit interleaver: `interleave(x)[i] = x[perm[i]]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interleaver {
    perm: Vec<usize>,
    seed: u64,
}

impl Interleaver {
    /// Uniform random permutation of `len` indices keyed by `seed`.
    pub fn random(len: usize, seed: u64) -> Self {
        let mut perm: Vec<usize> = (0..len).collect();
        perm.shuffle(&mut rng::stream(seed));
        Self { perm, seed }
    }

    pub fn identity(len: usize) -> Self {
        Self {
            perm: (0..len).collect(),
            seed: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn interleave<T: Copy>(&self, x: &[T]) -> Result<Vec<T>> {
        self.check(x.len())?;
        Ok(self.perm.iter().map(|&p| x[p]).collect())
    }

    pub fn deinterleave<T: Copy + Default>(&self, x: &[T]) -> Result<Vec<T>> {
        self.check(x.len())?;
        let mut out = vec![T::default(); x.len()];
        for (i, &p) in self.perm.iter().enumerate() {
            out[p] = x[i];
        }
        Ok(out)
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.perm.len() {
            return Err(Error::DimensionMismatch(format!(
                "sequence of length {len} through an interleaver of length {}",
                self.perm.len()
            )));
        }
        Ok(())
    }
}

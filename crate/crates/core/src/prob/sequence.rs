use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::prob::Pmf;
use crate::scalar::{stable_sum, Scalar};

/// Default cap on the number of entries of any dense table (2^24).
pub const DEFAULT_MATERIALIZE_LIMIT: u64 = 1 << 24;

/// Cap on dense table sizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaterializeLimit(pub u64);

impl Default for MaterializeLimit {
    fn default() -> Self {
        Self(DEFAULT_MATERIALIZE_LIMIT)
    }
}

impl MaterializeLimit {
    pub fn check(self, entries: u64) -> Result<()> {
        if entries > self.0 {
            Err(Error::TooLarge { entries, limit: self.0 })
        } else {
            Ok(())
        }
    }
}

/// Length-`T` sequences over `0..V`, indexed lexicographically with the
/// first symbol most significant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceSpace {
    alphabet_size: usize,
    length: usize,
    size: u64,
}

impl SequenceSpace {
    pub fn new(alphabet_size: usize, length: usize) -> Result<Self> {
        if alphabet_size == 0 {
            return Err(invalid("V", "alphabet size must be positive"));
        }
        if length == 0 {
            return Err(invalid("T", "sequence length must be positive"));
        }
        let size = u32::try_from(length)
            .ok()
            .and_then(|t| (alphabet_size as u64).checked_pow(t))
            .ok_or_else(|| invalid("T", format!("{alphabet_size}^{length} does not fit in 64 bits")))?;
        Ok(Self {
            alphabet_size,
            length,
            size,
        })
    }

    #[inline]
    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    #[inline]
    pub fn length(&self) -> usize {
        self.length
    }

    #[inline]
    pub fn size(&self) -> u64 {
        self.size
    }

    fn check_index(&self, index: u64) -> Result<()> {
        if index >= self.size {
            return Err(Error::IndexOutOfRange {
                index,
                bound: self.size,
            });
        }
        Ok(())
    }

    pub fn index_of(&self, symbols: &[usize]) -> Result<u64> {
        if symbols.len() != self.length {
            return Err(Error::DimensionMismatch {
                left: symbols.len(),
                right: self.length,
            });
        }
        let v = self.alphabet_size as u64;
        let mut index = 0u64;
        for &s in symbols {
            if s >= self.alphabet_size {
                return Err(Error::IndexOutOfRange {
                    index: s as u64,
                    bound: v,
                });
            }
            index = index * v + s as u64;
        }
        Ok(index)
    }

    /// Writes the symbols of `index` into `out` (length `T`).
    pub fn write_sequence(&self, index: u64, out: &mut [usize]) -> Result<()> {
        self.check_index(index)?;
        if out.len() != self.length {
            return Err(Error::DimensionMismatch {
                left: out.len(),
                right: self.length,
            });
        }
        let v = self.alphabet_size as u64;
        let mut rest = index;
        for slot in out.iter_mut().rev() {
            *slot = (rest % v) as usize;
            rest /= v;
        }
        Ok(())
    }

    pub fn sequence_of(&self, index: u64) -> Result<Vec<usize>> {
        let mut out = vec![0; self.length];
        self.write_sequence(index, &mut out)?;
        Ok(out)
    }
}

/// The product distribution `p^T` on a [`SequenceSpace`], queried without
/// materializing the `V^T` table.
#[derive(Clone, Debug)]
pub struct IidSource<F: Scalar> {
    base: Pmf<F>,
    space: SequenceSpace,
}

impl<F: Scalar> IidSource<F> {
    pub fn new(base: Pmf<F>, space: SequenceSpace) -> Result<Self> {
        if base.len() != space.alphabet_size() {
            return Err(Error::DimensionMismatch {
                left: base.len(),
                right: space.alphabet_size(),
            });
        }
        Ok(Self { base, space })
    }

    pub fn base(&self) -> &Pmf<F> {
        &self.base
    }

    pub fn space(&self) -> SequenceSpace {
        self.space
    }

    /// `ln p^T(x)`, `-∞` for sequences outside the support.
    pub fn log_prob(&self, index: u64) -> Result<F> {
        let symbols = self.space.sequence_of(index)?;
        Ok(self.log_prob_of(&symbols))
    }

    pub fn log_prob_of(&self, symbols: &[usize]) -> F {
        stable_sum(symbols.iter().map(|&s| self.base.get(s).ln()))
    }

    pub fn prob(&self, index: u64) -> Result<F> {
        Ok(self.log_prob(index)?.exp())
    }

    /// Dense `p^T` as a [`Pmf`] over `0..V^T`.
    pub fn materialize(&self, limit: MaterializeLimit) -> Result<Pmf<F>> {
        limit.check(self.space.size())?;
        let mut table = vec![F::one()];
        for _ in 0..self.space.length() {
            let mut next = Vec::with_capacity(table.len() * self.base.len());
            for &prefix in &table {
                next.extend(self.base.iter().map(|p| prefix * p));
            }
            table = next;
        }
        Pmf::new(table)
    }
}

/// `p^T` materialized over the lexicographic index space.
pub fn iid_extension<F: Scalar>(p: &Pmf<F>, space: SequenceSpace, limit: MaterializeLimit) -> Result<Pmf<F>> {
    IidSource::new(p.clone(), space)?.materialize(limit)
}

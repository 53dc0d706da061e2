use std::fmt;
use std::marker::PhantomData;

use serde::de::{self, SeqAccess, Visitor};
use serde::ser::SerializeSeq;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scalar::{stable_sum, Scalar};

/// Probability mass function over the indexed alphabet `0..len`.
///
/// Entries are non-negative and sum to one. Inputs whose total mass is off
/// by less than [`Scalar::NORMALIZE_TOLERANCE`] are renormalized at
/// construction; anything further off is rejected.
#[derive(Clone, PartialEq)]
pub struct Pmf<F> {
    probs: Vec<F>,
}

impl<F: Scalar> Pmf<F> {
    pub fn new(probs: Vec<F>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidPmf("empty support".into()));
        }
        for (i, &p) in probs.iter().enumerate() {
            if !p.is_finite() {
                return Err(Error::InvalidPmf(format!("entry {i} is not finite")));
            }
            if p < F::zero() {
                return Err(Error::InvalidPmf(format!("entry {i} is negative ({p})")));
            }
        }
        let total = stable_sum(probs.iter().copied());
        let deviation = (total - F::one()).abs().as_f64();
        if deviation >= F::NORMALIZE_TOLERANCE {
            return Err(Error::InvalidPmf(format!(
                "entries sum to {total}, deviation {deviation:e} from 1"
            )));
        }
        let probs = if total == F::one() {
            probs
        } else {
            probs.into_iter().map(|p| p / total).collect()
        };
        Ok(Self { probs })
    }

    pub fn from_f64s(values: &[f64]) -> Result<Self> {
        let converted = values
            .iter()
            .map(|&v| F::from_f64(v).ok_or_else(|| Error::InvalidPmf(format!("{v} not representable"))))
            .collect::<Result<Vec<F>>>()?;
        Self::new(converted)
    }

    /// Normalizes arbitrary non-negative weights. Used for tilted and
    /// water-filled families whose unnormalized mass is far from one.
    pub fn from_weights(weights: Vec<F>) -> Result<Self> {
        let total = stable_sum(weights.iter().copied());
        if !total.is_finite() || total <= F::zero() {
            return Err(Error::InvalidPmf(format!("weights have total mass {total}")));
        }
        Self::new(weights.into_iter().map(|w| w / total).collect())
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidPmf("empty support".into()));
        }
        let w = F::one() / F::lit(n as f64);
        Ok(Self { probs: vec![w; n] })
    }

    pub fn point_mass(n: usize, at: usize) -> Result<Self> {
        if at >= n {
            return Err(Error::IndexOutOfRange {
                index: at as u64,
                bound: n as u64,
            });
        }
        let mut probs = vec![F::zero(); n];
        probs[at] = F::one();
        Ok(Self { probs })
    }

    #[inline]
    pub fn probs(&self) -> &[F] {
        &self.probs
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> F {
        self.probs[i]
    }

    pub fn max(&self) -> F {
        self.probs.iter().copied().fold(F::zero(), F::max)
    }

    pub fn iter(&self) -> impl Iterator<Item = F> + '_ {
        self.probs.iter().copied()
    }

    pub fn into_inner(self) -> Vec<F> {
        self.probs
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.probs.iter().map(|p| p.as_f64()).collect()
    }

    /// Number of strictly positive entries.
    pub fn support_count(&self) -> usize {
        self.probs.iter().filter(|&&p| p > F::zero()).count()
    }

    pub fn cast<G: Scalar>(&self) -> Result<Pmf<G>> {
        Pmf::from_f64s(&self.to_f64_vec())
    }
}

impl<F: Scalar> fmt::Debug for Pmf<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Pmf").field(&self.probs).finish()
    }
}

impl<F: Scalar> Serialize for Pmf<F> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.probs.len()))?;
        for p in &self.probs {
            seq.serialize_element(&p.as_f64())?;
        }
        seq.end()
    }
}

impl<'de, F: Scalar> Deserialize<'de> for Pmf<F> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct PmfVisitor<F>(PhantomData<F>);

        impl<'de, F: Scalar> Visitor<'de> for PmfVisitor<F> {
            type Value = Pmf<F>;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a JSON array of probabilities")
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> std::result::Result<Pmf<F>, A::Error> {
                let mut values = Vec::new();
                while let Some(v) = seq.next_element::<f64>()? {
                    values.push(v);
                }
                Pmf::from_f64s(&values).map_err(de::Error::custom)
            }
        }

        deserializer.deserialize_seq(PmfVisitor(PhantomData))
    }
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::prob::Pmf;
use crate::scalar::Scalar;

/// Random stream handed to samplers.
pub type SampleStream = ChaCha8Rng;

/// Splittable seed: the same `(seed, stream_id)` always yields the same
/// stream, and distinct stream ids select disjoint ChaCha streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngSeed {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn with_stream(self, stream_id: u64) -> Self {
        Self { stream_id, ..self }
    }

    pub fn stream(self) -> SampleStream {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// Inverse-CDF draw by a linear scan in stored order.
pub fn sample_index<F: Scalar, R: Rng + ?Sized>(p: &Pmf<F>, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, x) in p.iter().enumerate() {
        let x = x.as_f64();
        if x > 0.0 {
            last_positive = i;
            acc += x;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

/// Precomputed cumulative table for repeated inverse-CDF draws; draws the
/// same index as [`sample_index`] for the same uniform, in `O(log n)`.
#[derive(Clone, Debug)]
pub struct Sampler {
    cdf: Vec<f64>,
    last_positive: usize,
}

impl Sampler {
    pub fn new<F: Scalar>(p: &Pmf<F>) -> Self {
        Self::from_weights(p.iter().map(|x| x.as_f64()))
    }

    /// Builds from non-negative weights summing to (about) one, e.g. a
    /// flattened coupling table.
    pub fn from_weights(weights: impl IntoIterator<Item = f64>) -> Self {
        let mut acc = 0.0;
        let mut last_positive = 0;
        let cdf = weights
            .into_iter()
            .enumerate()
            .map(|(i, w)| {
                if w > 0.0 {
                    last_positive = i;
                }
                acc += w;
                acc
            })
            .collect();
        Self { cdf, last_positive }
    }

    pub fn len(&self) -> usize {
        self.cdf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cdf.is_empty()
    }

    #[inline]
    pub fn index_for(&self, u: f64) -> usize {
        // first i with u < cdf[i]
        let i = self.cdf.partition_point(|&c| c <= u);
        i.min(self.last_positive)
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.index_for(rng.random())
    }
}

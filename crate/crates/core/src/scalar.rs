//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! All distribution arithmetic is written against [`Scalar`], so the same
//! code runs in `f64` (the default everywhere in the toolkit) and `f32`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point type usable for probabilities, divergences and tables.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + Default
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Largest deviation of a PMF's total mass from one that is silently
    /// renormalized. Larger deviations are rejected.
    const NORMALIZE_TOLERANCE: f64;

    /// Slack used when comparing quantities that should agree exactly up to
    /// rounding (typical-set membership, greedy bookkeeping).
    const ROUNDING_SLACK: f64;

    /// Converts an `f64` literal. Every finite `f64` maps into both
    /// supported types, so this never fails for finite input.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }

    /// `(self)_+`
    #[inline]
    fn positive_part(self) -> Self {
        if self > Self::zero() {
            self
        } else {
            Self::zero()
        }
    }
}

impl Scalar for f64 {
    const NORMALIZE_TOLERANCE: f64 = 1e-9;
    const ROUNDING_SLACK: f64 = 1e-12;
}

impl Scalar for f32 {
    const NORMALIZE_TOLERANCE: f64 = 1e-4;
    const ROUNDING_SLACK: f64 = 1e-5;
}

/// Sums with Neumaier compensation. Table totals in this crate reach
/// millions of terms and the invariants are checked at 1e-10.
pub fn stable_sum<F: Scalar, I: IntoIterator<Item = F>>(values: I) -> F {
    let mut sum = F::zero();
    let mut comp = F::zero();
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp = comp + ((sum - t) + v);
        } else {
            comp = comp + ((v - t) + sum);
        }
        sum = t;
    }
    sum + comp
}

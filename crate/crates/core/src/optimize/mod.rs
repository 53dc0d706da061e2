//! Programs over distortion balls around the source distribution.
//!
//! * [`minimize_overhang`]: smallest achievable min-max message error for a
//!   distortion budget `d` (TV: exact greedy leveling; KL: search along
//!   the Lagrangian clamp family).
//! * [`maximize_entropy`]: largest entropy inside the ball (KL: tilting;
//!   TV: water-filling).
//! * [`exponent_bound`]: the error-exponent ceiling for fixed joints.

mod entropy;
mod exponent;
mod metric;
mod overhang;

use serde::Serialize;

use crate::prob::Pmf;
use crate::scalar::Scalar;

pub use entropy::{maximize_entropy, tilted};
pub use exponent::exponent_bound;
pub use metric::DistortionMetric;
pub use overhang::{
    beta_star_of, minimize_overhang, minimize_overhang_at, tv_overhang_closed_form, KKT_TOLERANCE, MAX_ITERATIONS,
};

pub(crate) use overhang::check_alpha_m;

/// Result of a distortion-ball program.
#[derive(Clone, Debug, Serialize)]
pub struct OptimizerReport<F: Scalar> {
    pub argmin_or_argmax: Pmf<F>,
    pub objective_value: F,
    pub constraint_value: F,
    pub iterations: usize,
    /// Gap `d - D(P*‖q)` of the active constraint; KL paths only.
    pub kkt_residual: Option<F>,
    /// `false` means the iteration cap was hit before the KKT tolerance.
    pub converged: bool,
}

/// Smallest `x` in `[lo, hi]` with `pred(x)` for `pred` monotone
/// false→true. Returns the true-side end of the final bracket.
pub(crate) fn bisect<F: Scalar>(mut lo: F, mut hi: F, mut pred: impl FnMut(F) -> bool) -> F {
    for _ in 0..200 {
        let mid = (lo + hi) / F::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

//! Information measures on [`Pmf`]s. All logarithms are natural (nats).

use crate::error::{Error, Result};
use crate::prob::Pmf;
use crate::scalar::{stable_sum, Scalar};

fn same_support<F: Scalar>(p: &Pmf<F>, q: &Pmf<F>) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    Ok(())
}

/// Shannon entropy `-Σ p ln p`, with `0 ln 0 = 0`.
pub fn entropy<F: Scalar>(p: &Pmf<F>) -> F {
    let h = -stable_sum(p.iter().filter(|&x| x > F::zero()).map(|x| x * x.ln()));
    h.max(F::zero())
}

/// `D(p ‖ q) = Σ p ln(p/q)`.
///
/// Returns `F::infinity()` when `p` puts mass where `q` has none. The
/// infinite value is a sentinel and is propagated, never clamped.
pub fn kl_divergence<F: Scalar>(p: &Pmf<F>, q: &Pmf<F>) -> Result<F> {
    same_support(p, q)?;
    let mut terms = Vec::with_capacity(p.len());
    for (a, b) in p.iter().zip(q.iter()) {
        if a > F::zero() {
            if b <= F::zero() {
                return Ok(F::infinity());
            }
            terms.push(a * (a / b).ln());
        }
    }
    Ok(stable_sum(terms).max(F::zero()))
}

/// Total variation distance `Σ (p - q)_+`.
pub fn tv_distance<F: Scalar>(p: &Pmf<F>, q: &Pmf<F>) -> Result<F> {
    same_support(p, q)?;
    let pos = stable_sum(p.iter().zip(q.iter()).map(|(a, b)| (a - b).positive_part()));
    let neg = stable_sum(p.iter().zip(q.iter()).map(|(a, b)| (b - a).positive_part()));
    // Both sides equal the distance; averaging cancels one-sided rounding.
    Ok(((pos + neg) / F::lit(2.0)).min(F::one()))
}

/// `Σ (p(x) - τ)_+`, the mass sitting above the threshold `τ`.
pub fn overhang<F: Scalar>(p: &Pmf<F>, tau: F) -> F {
    stable_sum(p.iter().map(|x| (x - tau).positive_part()))
}

/// `Σ min(p(x), τ)`; complements [`overhang`] to one.
pub fn clipped_mass<F: Scalar>(p: &Pmf<F>, tau: F) -> F {
    stable_sum(p.iter().map(|x| x.min(tau)))
}

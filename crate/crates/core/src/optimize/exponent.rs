use crate::error::{invalid, Error, Result};
use crate::prob::{kl_divergence, Pmf};
use crate::scalar::Scalar;

/// Upper bound on the exponent of the message-`j` error for a fixed family
/// of per-symbol joints `joints[0..=m]` (index 0 is the unwatermarked
/// hypothesis): `min_{i≠j} D(joint_i ‖ joint_j)`.
///
/// Returns `+∞` when every competitor puts mass outside the support of
/// `joint_j`.
pub fn exponent_bound<F: Scalar>(joints: &[Pmf<F>], j: usize) -> Result<F> {
    if joints.len() < 2 {
        return Err(invalid("joints", "need at least two hypotheses"));
    }
    let m = joints.len() - 1;
    if j == 0 || j > m {
        return Err(invalid("j", format!("message index {j} outside [1, {m}]")));
    }
    let dim = joints[0].len();
    if let Some(bad) = joints.iter().find(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch {
            left: bad.len(),
            right: dim,
        });
    }
    let mut best = F::infinity();
    for (i, joint) in joints.iter().enumerate() {
        if i != j {
            best = best.min(kl_divergence(joint, &joints[j])?);
        }
    }
    Ok(best)
}

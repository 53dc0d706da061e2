//! Entropy maximization over a distortion ball: the rate-optimal
//! watermarked marginal when some distortion is allowed.

use std::cmp::Ordering;

use crate::error::{invalid, Result};
use crate::optimize::{bisect, DistortionMetric, OptimizerReport};
use crate::prob::{entropy, kl_divergence, tv_distance, Pmf};
use crate::scalar::Scalar;

/// Tilted member `P_β(x) ∝ q(x)^β` on the support of `q`. `β = 0` is the
/// uniform distribution on the support, `β = 1` is `q` itself.
pub fn tilted<F: Scalar>(q: &Pmf<F>, beta: F) -> Result<Pmf<F>> {
    let logs: Vec<F> = q
        .iter()
        .map(|x| {
            if x > F::zero() {
                beta * x.ln()
            } else {
                F::neg_infinity()
            }
        })
        .collect();
    let top = logs.iter().copied().fold(F::neg_infinity(), F::max);
    Pmf::from_weights(logs.into_iter().map(|l| (l - top).exp()).collect())
}

fn uniform_on_support<F: Scalar>(q: &Pmf<F>) -> Result<Pmf<F>> {
    tilted(q, F::zero())
}

/// Maximizes `H(P)` subject to `metric(P, q) <= d`.
///
/// KL: bisection over the tilted family `q^β`, which keeps the zeros of `q`.
/// TV: water-filling, clamping `q` between two levels that each move
/// `min(d, TV(q, uniform))` of mass.
pub fn maximize_entropy<F: Scalar>(q: &Pmf<F>, d: F, metric: DistortionMetric) -> Result<OptimizerReport<F>> {
    if d.is_nan() || d < F::zero() {
        return Err(invalid("d", format!("distortion budget {d} must be >= 0")));
    }
    if d == F::zero() {
        return Ok(OptimizerReport {
            objective_value: entropy(q),
            argmin_or_argmax: q.clone(),
            constraint_value: F::zero(),
            iterations: 0,
            kkt_residual: matches!(metric, DistortionMetric::KlForward).then(F::zero),
            converged: true,
        });
    }
    match metric {
        DistortionMetric::KlForward => maximize_entropy_kl(q, d),
        DistortionMetric::Tv => maximize_entropy_tv(q, d),
    }
}

fn maximize_entropy_kl<F: Scalar>(q: &Pmf<F>, d: F) -> Result<OptimizerReport<F>> {
    let uniform = uniform_on_support(q)?;
    let saturation = kl_divergence(&uniform, q)?;
    if saturation <= d {
        return Ok(OptimizerReport {
            objective_value: entropy(&uniform),
            argmin_or_argmax: uniform,
            constraint_value: saturation,
            iterations: 0,
            kkt_residual: Some(F::zero()),
            converged: true,
        });
    }
    // KL(P_β‖q) decreases in β; find the smallest feasible β.
    let mut iterations = 0;
    let beta = bisect(F::zero(), F::one(), |b| {
        iterations += 1;
        tilted(q, b)
            .and_then(|p| kl_divergence(&p, q))
            .map(|kl| kl <= d)
            .unwrap_or(false)
    });
    let p = tilted(q, beta)?;
    let kl = kl_divergence(&p, q)?;
    let gap = d - kl;
    Ok(OptimizerReport {
        objective_value: entropy(&p),
        argmin_or_argmax: p,
        constraint_value: kl,
        iterations,
        kkt_residual: Some(gap),
        converged: gap.as_f64() < super::overhang::KKT_TOLERANCE,
    })
}

/// Level `h` with `Σ (v - h)_+ = budget`, for `0 <= budget <= Σ (v - min v)`.
fn level_from_top<F: Scalar>(values: &[F], budget: F) -> F {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    let mut prefix = F::zero();
    for k in 0..sorted.len() {
        prefix = prefix + sorted[k];
        let h = (prefix - budget) / F::lit((k + 1) as f64);
        let next = sorted.get(k + 1).copied().unwrap_or(F::neg_infinity());
        if h >= next {
            return h;
        }
    }
    sorted[sorted.len() - 1]
}

/// Level `l` with `Σ (l - v)_+ = budget`.
fn level_from_bottom<F: Scalar>(values: &[F], budget: F) -> F {
    let negated: Vec<F> = values.iter().map(|&v| -v).collect();
    -level_from_top(&negated, budget)
}

fn maximize_entropy_tv<F: Scalar>(q: &Pmf<F>, d: F) -> Result<OptimizerReport<F>> {
    let n = q.len();
    let uniform = Pmf::uniform(n)?;
    let budget = d.min(tv_distance(q, &uniform)?);
    let high = level_from_top(q.probs(), budget);
    let low = level_from_bottom(q.probs(), budget).min(high);
    let clamped: Vec<F> = q.iter().map(|x| x.max(low).min(high)).collect();
    let p = Pmf::from_weights(clamped)?;
    let tv = tv_distance(&p, q)?;
    Ok(OptimizerReport {
        objective_value: entropy(&p),
        argmin_or_argmax: p,
        constraint_value: tv,
        iterations: 1,
        kkt_residual: None,
        converged: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pmf(v: &[f64]) -> Pmf<f64> {
        Pmf::from_f64s(v).unwrap()
    }

    #[test]
    fn zero_budget_is_identity() {
        let q = pmf(&[0.7, 0.3]);
        for metric in [DistortionMetric::Tv, DistortionMetric::KlForward] {
            let r = maximize_entropy(&q, 0.0, metric).unwrap();
            assert_eq!(r.argmin_or_argmax, q);
        }
    }

    #[test]
    fn saturated_budget_gives_uniform() {
        let q = pmf(&[0.6, 0.3, 0.1]);
        let u = Pmf::<f64>::uniform(3).unwrap();
        let sat = kl_divergence(&u, &q).unwrap();
        let r = maximize_entropy(&q, sat, DistortionMetric::KlForward).unwrap();
        assert_abs_diff_eq!(r.objective_value, 3f64.ln(), epsilon = 1e-15);
        let r = maximize_entropy(&q, 1.0, DistortionMetric::Tv).unwrap();
        assert_abs_diff_eq!(r.objective_value, 3f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn tilting_keeps_zeros() {
        let q = pmf(&[0.9, 0.1, 0.0]);
        let r = maximize_entropy(&q, 100.0, DistortionMetric::KlForward).unwrap();
        assert_eq!(r.argmin_or_argmax.get(2), 0.0);
        assert_abs_diff_eq!(r.objective_value, 2f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn kl_budget_is_active() {
        let q = pmf(&[0.7, 0.3]);
        let r = maximize_entropy(&q, 0.05, DistortionMetric::KlForward).unwrap();
        assert!(r.converged);
        assert!(r.constraint_value <= 0.05);
        assert!(0.05 - r.constraint_value < 1e-8);
    }

    #[test]
    fn tv_water_filling_moves_budget() {
        let q = pmf(&[0.7, 0.2, 0.1]);
        let r = maximize_entropy(&q, 0.2, DistortionMetric::Tv).unwrap();
        // top level 0.5; bottom level l with (l-0.2)+(l-0.1) = 0.2 -> l = 0.25
        for (got, want) in r.argmin_or_argmax.iter().zip([0.5, 0.25, 0.25]) {
            assert_abs_diff_eq!(got, want, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(r.constraint_value, 0.2, epsilon = 1e-12);
    }

    #[test]
    fn levels_solve_their_equations() {
        let v = [0.5f64, 0.1, 0.3, 0.1];
        let h = level_from_top(&v, 0.25);
        let moved: f64 = v.iter().map(|x| (x - h).max(0.0)).sum();
        assert_abs_diff_eq!(moved, 0.25, epsilon = 1e-15);
        let l = level_from_bottom(&v, 0.15);
        let moved: f64 = v.iter().map(|x| (l - x).max(0.0)).sum();
        assert_abs_diff_eq!(moved, 0.15, epsilon = 1e-15);
    }
}

//! Minimizing the overhang `Σ (P(x) - τ)_+` over a distortion ball around
//! the source `q`. The optimal value is the universal min-max message error.

use std::cmp::Ordering;

use crate::error::{invalid, Result};
use crate::optimize::{bisect, DistortionMetric, OptimizerReport};
use crate::prob::{kl_divergence, overhang, Pmf};
use crate::scalar::{stable_sum, Scalar};

/// KL path stops once the active-constraint gap falls below this.
pub const KKT_TOLERANCE: f64 = 1e-8;
/// Iteration cap for the KL path.
pub const MAX_ITERATIONS: usize = 100_000;

pub(crate) fn check_alpha_m<F: Scalar>(alpha: F, m: u64) -> Result<F> {
    if !(alpha > F::zero() && alpha < F::one()) {
        return Err(invalid("alpha", format!("{alpha} is outside (0, 1)")));
    }
    if m == 0 {
        return Err(invalid("m", "message set must be non-empty"));
    }
    Ok(alpha / F::lit(m as f64))
}

fn check_budget<F: Scalar>(d: F) -> Result<()> {
    if d.is_nan() || d < F::zero() {
        return Err(invalid("d", format!("distortion budget {d} must be >= 0")));
    }
    Ok(())
}

/// `overhang(p, α/m)`: the min-max message error of a scheme whose
/// watermarked marginal is `p`.
pub fn beta_star_of<F: Scalar>(p: &Pmf<F>, alpha: F, m: u64) -> Result<F> {
    let tau = check_alpha_m(alpha, m)?;
    Ok(overhang(p, tau))
}

/// Closed-form TV-ball optimum
/// `max(overhang(q,τ) - min(d, fill), 1 - Vτ, 0)` with
/// `fill = Σ (τ - q(x))_+`.
pub fn tv_overhang_closed_form<F: Scalar>(q: &Pmf<F>, tau: F, d: F) -> F {
    let fill = stable_sum(q.iter().map(|x| (tau - x).positive_part()));
    let floor = F::one() - F::lit(q.len() as f64) * tau;
    (overhang(q, tau) - d.min(fill)).max(floor).max(F::zero())
}

/// Minimizes `overhang(P, α/m)` subject to `metric(P, q) <= d`.
pub fn minimize_overhang<F: Scalar>(
    q: &Pmf<F>,
    alpha: F,
    m: u64,
    d: F,
    metric: DistortionMetric,
) -> Result<OptimizerReport<F>> {
    let tau = check_alpha_m(alpha, m)?;
    minimize_overhang_at(q, tau, d, metric)
}

/// [`minimize_overhang`] with the threshold `τ` given directly.
pub fn minimize_overhang_at<F: Scalar>(
    q: &Pmf<F>,
    tau: F,
    d: F,
    metric: DistortionMetric,
) -> Result<OptimizerReport<F>> {
    check_budget(d)?;
    if tau.is_nan() || tau < F::zero() {
        return Err(invalid("tau", format!("{tau} must be >= 0")));
    }
    let kkt = match metric {
        DistortionMetric::Tv => None,
        DistortionMetric::KlForward => Some(F::zero()),
    };
    if d == F::zero() || tau >= q.max() {
        return Ok(OptimizerReport {
            argmin_or_argmax: q.clone(),
            objective_value: overhang(q, tau),
            constraint_value: F::zero(),
            iterations: 0,
            kkt_residual: kkt,
            converged: true,
        });
    }
    match metric {
        DistortionMetric::Tv => Ok(tv_leveling(q, tau, d)?),
        DistortionMetric::KlForward => kl_clamp_search(q, tau, d),
    }
}

/// Greedy leveling: moves up to `d` of mass from symbols above `τ` to
/// symbols below it. Donors in decreasing-excess order, receivers in
/// decreasing-deficit order (ties by index).
fn tv_leveling<F: Scalar>(q: &Pmf<F>, tau: F, d: F) -> Result<OptimizerReport<F>> {
    let probs = q.probs();
    let by_desc = |a: &(usize, F), b: &(usize, F)| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0));

    let mut donors: Vec<(usize, F)> = probs
        .iter()
        .enumerate()
        .filter(|(_, &x)| x > tau)
        .map(|(i, &x)| (i, x - tau))
        .collect();
    donors.sort_by(by_desc);
    let mut receivers: Vec<(usize, F)> = probs
        .iter()
        .enumerate()
        .filter(|(_, &x)| x < tau)
        .map(|(i, &x)| (i, tau - x))
        .collect();
    receivers.sort_by(by_desc);

    let excess = stable_sum(donors.iter().map(|d| d.1));
    let fill = stable_sum(receivers.iter().map(|r| r.1));
    let budget = d.min(excess).min(fill);

    let mut out = probs.to_vec();
    let mut left = budget;
    for &(i, e) in &donors {
        if left <= F::zero() {
            break;
        }
        let take = e.min(left);
        out[i] = out[i] - take;
        left = left - take;
    }
    let mut left = budget;
    for &(i, g) in &receivers {
        if left <= F::zero() {
            break;
        }
        let give = g.min(left);
        out[i] = out[i] + give;
        left = left - give;
    }

    let p = Pmf::new(out)?;
    let constraint = DistortionMetric::Tv.evaluate(&p, q)?;
    Ok(OptimizerReport {
        objective_value: overhang(&p, tau),
        argmin_or_argmax: p,
        constraint_value: constraint,
        iterations: donors.len() + receivers.len(),
        kkt_residual: None,
        converged: true,
    })
}

/// Stationary points of `overhang + λ·KL(P‖q)` have the form
/// `P(x) = min(q(x)·hi, max(q(x)·lo, τ))` with `hi/lo = e^{1/λ}` and `lo`
/// fixed by normalization. `hi = None` is the `λ → 0` limit.
fn clamp_profile<F: Scalar>(q: &[F], tau: F, lo: F, hi: Option<F>) -> Vec<F> {
    q.iter()
        .map(|&x| {
            if x <= F::zero() {
                return F::zero();
            }
            let raised = (x * lo).max(tau);
            match hi {
                Some(h) => raised.min(x * h),
                None => raised,
            }
        })
        .collect()
}

fn profile_mass<F: Scalar>(q: &[F], tau: F, lo: F, hi: Option<F>) -> F {
    stable_sum(clamp_profile(q, tau, lo, hi))
}

/// Normalized profile for log-ratio `t = ln(hi/lo)`; `None` means `t = ∞`.
fn profile_at<F: Scalar>(q: &Pmf<F>, tau: F, log_ratio: Option<F>) -> Result<Pmf<F>> {
    let probs = q.probs();
    let one = F::one();
    let weights = match log_ratio {
        Some(t) => {
            let r = t.exp();
            let lo = bisect(F::zero(), one, |lo| profile_mass(probs, tau, lo, Some(lo * r)) >= one);
            clamp_profile(probs, tau, lo, Some(lo * r))
        }
        None => {
            let support = q.support_count();
            if F::lit(support as f64) * tau >= one {
                // optimal face has zero overhang; push everything to ≤ τ
                let q_min = q.iter().filter(|&x| x > F::zero()).fold(one, F::min);
                let top = (tau / q_min).max(one);
                let hi = bisect(F::zero(), top, |h| profile_mass(probs, tau, F::zero(), Some(h)) >= one);
                clamp_profile(probs, tau, F::zero(), Some(hi))
            } else {
                let lo = bisect(F::zero(), one, |lo| profile_mass(probs, tau, lo, None) >= one);
                clamp_profile(probs, tau, lo, None)
            }
        }
    };
    Pmf::from_weights(weights)
}

fn kl_clamp_search<F: Scalar>(q: &Pmf<F>, tau: F, d: F) -> Result<OptimizerReport<F>> {
    let report = |p: Pmf<F>, kl: F, iterations: usize, residual: F| OptimizerReport {
        objective_value: overhang(&p, tau),
        argmin_or_argmax: p,
        constraint_value: kl,
        iterations,
        kkt_residual: Some(residual),
        converged: residual.as_f64() < KKT_TOLERANCE,
    };

    let limit = profile_at(q, tau, None)?;
    let limit_kl = kl_divergence(&limit, q)?;
    if limit_kl <= d {
        return Ok(report(limit, limit_kl, 1, F::zero()));
    }

    let max_log_ratio = F::lit(700.0);
    let mut feasible = (F::zero(), q.clone(), F::zero());
    let mut upper = F::one();
    let mut iterations = 0usize;
    loop {
        iterations += 1;
        let p = profile_at(q, tau, Some(upper))?;
        let kl = kl_divergence(&p, q)?;
        if kl > d {
            break;
        }
        feasible = (upper, p, kl);
        if upper >= max_log_ratio {
            let gap = d - feasible.2;
            return Ok(report(feasible.1, feasible.2, iterations, gap));
        }
        upper = (upper * F::lit(2.0)).min(max_log_ratio);
    }

    while iterations < MAX_ITERATIONS {
        if (d - feasible.2).as_f64() < KKT_TOLERANCE * 1e-2 {
            break;
        }
        let mid = (feasible.0 + upper) / F::lit(2.0);
        if mid <= feasible.0 || mid >= upper {
            break;
        }
        iterations += 1;
        let p = profile_at(q, tau, Some(mid))?;
        let kl = kl_divergence(&p, q)?;
        if kl <= d {
            feasible = (mid, p, kl);
        } else {
            upper = mid;
        }
    }
    let gap = d - feasible.2;
    Ok(report(feasible.1, feasible.2, iterations, gap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pmf(v: &[f64]) -> Pmf<f64> {
        Pmf::from_f64s(v).unwrap()
    }

    #[test]
    fn beta_star_examples() {
        // uniform over 8, tau = 0.25 >= 1/8
        assert_eq!(beta_star_of(&Pmf::<f64>::uniform(8).unwrap(), 0.5, 2).unwrap(), 0.0);
        assert_abs_diff_eq!(
            beta_star_of(&Pmf::<f64>::point_mass(3, 0).unwrap(), 0.3, 1).unwrap(),
            0.7,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            beta_star_of(&pmf(&[0.5, 0.3, 0.2]), 0.3, 3).unwrap(),
            0.7,
            epsilon = 1e-15
        );
    }

    #[test]
    fn beta_star_rejects_bad_parameters() {
        let p = pmf(&[0.5, 0.5]);
        assert!(beta_star_of(&p, 0.0, 1).is_err());
        assert!(beta_star_of(&p, 1.0, 1).is_err());
        assert!(beta_star_of(&p, 0.5, 0).is_err());
    }

    #[test]
    fn empty_ball_returns_source() {
        let q = pmf(&[0.7, 0.2, 0.1]);
        for metric in [DistortionMetric::Tv, DistortionMetric::KlForward] {
            let r = minimize_overhang(&q, 0.5, 2, 0.0, metric).unwrap();
            assert_eq!(r.argmin_or_argmax, q);
            assert_abs_diff_eq!(r.objective_value, overhang(&q, 0.25), epsilon = 1e-15);
        }
    }

    #[test]
    fn tv_examples() {
        let q = pmf(&[0.7, 0.2, 0.1]);
        let r = minimize_overhang_at(&q, 0.25, 0.2, DistortionMetric::Tv).unwrap();
        for (got, want) in r.argmin_or_argmax.iter().zip([0.5, 0.25, 0.25]) {
            assert_abs_diff_eq!(got, want, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(r.objective_value, 0.25, epsilon = 1e-12);
        assert!(r.constraint_value <= 0.2 + 1e-9);

        let r = minimize_overhang_at(&q, 0.25, 1.0, DistortionMetric::Tv).unwrap();
        assert_abs_diff_eq!(r.objective_value, 0.25, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_threshold_short_circuits() {
        let q = pmf(&[0.4, 0.3, 0.3]);
        let r = minimize_overhang_at(&q, 0.5, 0.3, DistortionMetric::KlForward).unwrap();
        assert_eq!(r.argmin_or_argmax, q);
        assert_eq!(r.objective_value, 0.0);
    }

    #[test]
    fn kl_path_respects_budget_and_improves() {
        let q = pmf(&[0.6, 0.25, 0.1, 0.05]);
        let tau = 0.2;
        for d in [0.01, 0.05, 0.2, 1.0, 5.0] {
            let r = minimize_overhang_at(&q, tau, d, DistortionMetric::KlForward).unwrap();
            assert!(r.converged, "d = {d}: {r:?}");
            assert!(r.constraint_value <= d + 1e-9);
            assert!(r.objective_value <= overhang(&q, tau));
            let pinsker = (overhang(&q, tau) - (d / 2.0).sqrt()).max(0.0);
            assert!(r.objective_value >= pinsker - 1e-9);
        }
    }

    #[test]
    fn kl_path_saturates_at_floor() {
        let q = pmf(&[0.7, 0.2, 0.1]);
        let r = minimize_overhang_at(&q, 0.25, 50.0, DistortionMetric::KlForward).unwrap();
        assert_abs_diff_eq!(r.objective_value, 0.25, epsilon = 1e-9);
        // zero-overhang regime: V·τ ≥ 1
        let r = minimize_overhang_at(&q, 0.4, 50.0, DistortionMetric::KlForward).unwrap();
        assert!(r.objective_value < 1e-9);
    }

    #[test]
    fn kl_path_keeps_zeros() {
        let q = pmf(&[0.8, 0.2, 0.0]);
        let r = minimize_overhang_at(&q, 0.3, 10.0, DistortionMetric::KlForward).unwrap();
        assert_eq!(r.argmin_or_argmax.get(2), 0.0);
        // floor is 1 - 2τ on the two-symbol support
        assert_abs_diff_eq!(r.objective_value, 0.4, epsilon = 1e-9);
    }
}

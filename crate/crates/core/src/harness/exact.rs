use serde::Serialize;

use crate::prob::Pmf;
use crate::scalar::{stable_sum, Scalar};
use crate::scheme::{DecoderSpec, SchemeBundle, ALIGNED_MESSAGE};

/// Tolerance on marginal deviations and on the aligned-message equality.
pub const MARGINAL_TOLERANCE: f64 = 1e-10;
/// Slack on the false-alarm level.
pub const FALSE_ALARM_SLACK: f64 = 1e-12;

const DENOMINATOR_NOTE: &str = "off-diagonal cells are divided by the per-message residual r_j \
(equal to beta* for the aligned message) instead of beta*, so both marginals hold for every message";

/// Exact `β_j = 1 - Σ_{decode = j} table_j`, for `j = 1..=m`.
pub fn exact_errors<F: Scalar>(bundle: &SchemeBundle<F>) -> Vec<F> {
    bundle
        .couplings
        .iter()
        .map(|c| (F::one() - c.decoded_mass(&bundle.decoder)).max(F::zero()))
        .collect()
}

/// `max_x Σ_ζ p_ζ(ζ)·1{decode(x, ζ) ≠ 0}`. The false alarm is linear in
/// the data law, so the supremum sits at a point mass.
pub fn worst_case_false_alarm<F: Scalar>(decoder: &DecoderSpec, p_zeta: &Pmf<F>) -> F {
    (0..decoder.n)
        .map(|x| stable_sum((1..=decoder.m).map(|j| p_zeta.get(decoder.zeta_for(j, x) as usize))))
        .fold(F::zero(), F::max)
}

/// Outcome of [`validate`]. Failed checks are fields, never errors.
#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport<F: Scalar> {
    pub m: u64,
    pub alpha: F,
    /// Largest row/column deviation from the shared marginals, per message.
    pub marginal_deviation: Vec<F>,
    pub marginals_ok: bool,
    pub beta: Vec<F>,
    pub beta_star: F,
    pub aligned_message: u64,
    pub aligned_message_ok: bool,
    pub max_beta: F,
    /// `max_j β_j > β*`: some message does worse than the aligned one.
    pub misalignment_flag: bool,
    pub false_alarm_worst_case: F,
    pub false_alarm_ok: bool,
    /// `max_j β_j ≥ β* - 1e-10`.
    pub converse_ok: bool,
    pub residual_mass: Vec<F>,
    pub denominator_note: String,
}

impl<F: Scalar> ValidationReport<F> {
    /// Every check passed and no flag was raised.
    pub fn all_ok(&self) -> bool {
        self.marginals_ok
            && self.aligned_message_ok
            && self.false_alarm_ok
            && self.converse_ok
            && !self.misalignment_flag
    }
}

/// Exact validation of a bundle by full enumeration.
pub fn validate<F: Scalar>(bundle: &SchemeBundle<F>) -> ValidationReport<F> {
    let tol = F::lit(MARGINAL_TOLERANCE);
    let marginal_deviation: Vec<F> = bundle
        .couplings
        .iter()
        .map(|c| {
            let rows = c
                .row_sums()
                .into_iter()
                .zip(bundle.p_x_star.iter())
                .map(|(a, b)| (a - b).abs());
            let cols = c
                .col_sums()
                .into_iter()
                .zip(bundle.p_zeta_star.iter())
                .map(|(a, b)| (a - b).abs());
            rows.chain(cols).fold(F::zero(), F::max)
        })
        .collect();
    let beta = exact_errors(bundle);
    let max_beta = beta.iter().copied().fold(F::zero(), F::max);
    let aligned = beta.get((ALIGNED_MESSAGE - 1) as usize).copied();
    let fa = worst_case_false_alarm(&bundle.decoder, &bundle.p_zeta_star);
    let alpha = bundle.params.alpha;
    ValidationReport {
        m: bundle.m(),
        alpha,
        marginals_ok: marginal_deviation.iter().all(|&d| d < tol),
        marginal_deviation,
        aligned_message: ALIGNED_MESSAGE,
        aligned_message_ok: aligned.is_some_and(|b| (b - bundle.beta_star).abs() <= tol),
        misalignment_flag: max_beta > bundle.beta_star + tol,
        converse_ok: max_beta >= bundle.beta_star - tol,
        false_alarm_ok: fa <= alpha + F::lit(FALSE_ALARM_SLACK),
        false_alarm_worst_case: fa,
        max_beta,
        beta,
        beta_star: bundle.beta_star,
        residual_mass: bundle.couplings.iter().map(|c| c.residual_mass).collect(),
        denominator_note: DENOMINATOR_NOTE.into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimize::DistortionMetric;
    use crate::prob::MaterializeLimit;
    use crate::scheme::{build_finite_scheme, DecoderFamily, SchemeParams};
    use approx::assert_abs_diff_eq;

    fn bundle(q: &[f64], v: usize, t: usize, m: u64, alpha: f64, d: f64) -> SchemeBundle<f64> {
        let params = SchemeParams {
            alphabet_size: v,
            length: t,
            m,
            alpha,
            d,
            metric: DistortionMetric::Tv,
            family: DecoderFamily::Cyclic,
            seed: 0,
        };
        build_finite_scheme(&params, &Pmf::from_f64s(q).unwrap(), MaterializeLimit::default()).unwrap()
    }

    #[test]
    fn symmetric_binary_bundle() {
        let b = bundle(&[0.5, 0.5], 2, 1, 2, 0.8, 0.0);
        let beta = exact_errors(&b);
        assert_abs_diff_eq!(beta[0], 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(beta[1], 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(worst_case_false_alarm(&b.decoder, &b.p_zeta_star), 0.8, epsilon = 1e-15);
        let r = validate(&b);
        assert!(r.all_ok());
    }

    #[test]
    fn skewed_binary_bundle_raises_misalignment() {
        let b = bundle(&[0.7, 0.3], 2, 1, 2, 0.8, 0.0);
        let r = validate(&b);
        assert_abs_diff_eq!(r.beta[0], 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(r.beta[1], 0.4, epsilon = 1e-12);
        assert!(r.aligned_message_ok && r.converse_ok && r.misalignment_flag);
        assert!(!r.all_ok());
    }

    #[test]
    fn degenerate_decoder_never_alarms() {
        let d = DecoderSpec::new(DecoderFamily::Cyclic, 4, 0).unwrap();
        let p = Pmf::<f64>::uniform(5).unwrap();
        assert_eq!(worst_case_false_alarm(&d, &p), 0.0);
    }

    #[test]
    fn uniform_source_has_zero_error() {
        let b = bundle(&[0.25; 4], 4, 1, 2, 0.6, 0.0);
        assert!(exact_errors(&b).iter().all(|&x| x.abs() < 1e-15));
    }
}

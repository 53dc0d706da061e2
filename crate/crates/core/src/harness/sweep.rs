use serde::Serialize;

use crate::error::Result;
use crate::harness::exact::{exact_errors, worst_case_false_alarm};
use crate::harness::montecarlo::SimReport;
use crate::optimize::exponent_bound;
use crate::prob::Pmf;
use crate::scalar::Scalar;
use crate::scheme::SchemeBundle;

/// One CSV row per `(configuration, message)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    #[serde(rename = "V")]
    pub v: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub m: u64,
    pub alpha: f64,
    pub d: f64,
    pub metric: String,
    pub j: u64,
    pub beta_exact: f64,
    pub beta_hat: Option<f64>,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
    pub beta_star: f64,
    pub fa_worst: f64,
    pub seed: u64,
}

/// CSV column order.
pub const SWEEP_COLUMNS: [&str; 14] = [
    "V",
    "T",
    "m",
    "alpha",
    "d",
    "metric",
    "j",
    "beta_exact",
    "beta_hat",
    "ci_lo",
    "ci_hi",
    "beta_star",
    "fa_worst",
    "seed",
];

/// Rows for every message of `bundle`, with Monte Carlo columns filled
/// from `sim` when given.
pub fn sweep_rows<F: Scalar>(bundle: &SchemeBundle<F>, sim: Option<&SimReport>) -> Vec<SweepRow> {
    let beta = exact_errors(bundle);
    let fa = worst_case_false_alarm(&bundle.decoder, &bundle.p_zeta_star).as_f64();
    let p = &bundle.params;
    beta.iter()
        .enumerate()
        .map(|(k, b)| {
            let est = sim.and_then(|s| s.beta_hat.get(k));
            SweepRow {
                v: p.alphabet_size,
                t: p.length,
                m: p.m,
                alpha: p.alpha.as_f64(),
                d: p.d.as_f64(),
                metric: p.metric.to_string(),
                j: k as u64 + 1,
                beta_exact: b.as_f64(),
                beta_hat: est.map(|e| e.estimate),
                ci_lo: est.map(|e| e.ci_lo),
                ci_hi: est.map(|e| e.ci_hi),
                beta_star: bundle.beta_star.as_f64(),
                fa_worst: fa,
                seed: p.seed,
            }
        })
        .collect()
}

/// The `m + 1` joints of a bundle over `(x, ζ)` cells: index 0 is the
/// unwatermarked product `P_X* ⊗ P_ζ*`, index `j` the message-`j` coupling.
pub fn bundle_joints<F: Scalar>(bundle: &SchemeBundle<F>) -> Result<Vec<Pmf<F>>> {
    let mut null = Vec::with_capacity(bundle.n() * (bundle.n() + 1));
    for px in bundle.p_x_star.iter() {
        null.extend(bundle.p_zeta_star.iter().map(|pz| px * pz));
    }
    let mut joints = vec![Pmf::new(null)?];
    for c in &bundle.couplings {
        joints.push(c.as_joint()?);
    }
    Ok(joints)
}

/// Exponent ceiling of every message for a bundle's joints.
pub fn bundle_exponent_bounds<F: Scalar>(bundle: &SchemeBundle<F>) -> Result<Vec<F>> {
    let joints = bundle_joints(bundle)?;
    (1..joints.len()).map(|j| exponent_bound(&joints, j)).collect()
}

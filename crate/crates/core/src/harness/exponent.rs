use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::harness::montecarlo::{monte_carlo, Estimate, SimConfig, TrialRunner};
use crate::optimize::exponent_bound;
use crate::prob::{kl_divergence, MaterializeLimit, Pmf, SampleStream, Sampler};

/// Neyman–Pearson test between message `j` and its nearest rival `i*`
/// on `T` i.i.d. symbols.
///
/// Decides `i*` iff the log-likelihood ratio `Σ_c n_c ln(P_i*(c)/P_j(c))`
/// reaches `threshold`, the largest attained value with
/// `P_i*(LLR < threshold) ≤ level`.
#[derive(Clone, Debug, Serialize)]
pub struct NpTest {
    pub j: usize,
    pub rival: usize,
    pub length: usize,
    pub level: f64,
    pub threshold: f64,
    /// Exact `P_j(decide rival)`.
    pub beta_exact: f64,
    /// Exact `P_rival(decide j)`, at most `level`.
    pub rival_error: f64,
    #[serde(skip)]
    weights: Vec<f64>,
    #[serde(skip)]
    sampler: Sampler,
}

impl NpTest {
    /// `llr` summed in cell order, so equal counts give equal floats.
    fn llr(&self, counts: &[u32]) -> f64 {
        llr(&self.weights, counts)
    }
}

fn llr(weights: &[f64], counts: &[u32]) -> f64 {
    let mut acc = 0.0;
    for (w, &n) in weights.iter().zip(counts) {
        if n > 0 {
            acc += n as f64 * w;
        }
    }
    acc
}

fn check_joints(joints: &[Pmf<f64>], j: usize) -> Result<()> {
    if joints.len() < 2 {
        return Err(invalid("joints", "need at least two hypotheses"));
    }
    if j == 0 || j >= joints.len() {
        return Err(invalid("j", format!("message {j} outside [1, {}]", joints.len() - 1)));
    }
    let dim = joints[0].len();
    if let Some(bad) = joints.iter().find(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch {
            left: bad.len(),
            right: dim,
        });
    }
    Ok(())
}

/// Builds the test for message `j` at length `T`, with exact error
/// probabilities from enumerating every type of `T` over the cells.
pub fn np_test(joints: &[Pmf<f64>], j: usize, length: usize, level: f64, limit: MaterializeLimit) -> Result<NpTest> {
    check_joints(joints, j)?;
    if length == 0 {
        return Err(invalid("T", "sequence length must be >= 1"));
    }
    if !(0.0..1.0).contains(&level) {
        return Err(invalid("level", "must lie in [0, 1)"));
    }
    let pj = &joints[j];
    let mut rival = None;
    let mut best = f64::INFINITY;
    for (i, p) in joints.iter().enumerate() {
        if i == j {
            continue;
        }
        let d = kl_divergence(p, pj)?;
        if rival.is_none() || d < best {
            best = d;
            rival = Some(i);
        }
    }
    let rival = rival.expect("at least one rival");
    let pi = &joints[rival];
    let weights: Vec<f64> = pi.iter().zip(pj.iter()).map(|(a, b)| (a / b).ln()).collect();

    let cells = pj.len();
    let types = binomial(length + cells - 1, cells - 1);
    limit.check(types.unwrap_or(u64::MAX))?;

    let lfact: Vec<f64> = (0..=length)
        .scan(0.0, |acc, k| {
            if k > 0 {
                *acc += (k as f64).ln();
            }
            Some(*acc)
        })
        .collect();
    let log_prob = |p: &Pmf<f64>, c: &[u32]| -> f64 {
        let mut lp = lfact[length];
        for (k, &n) in c.iter().enumerate() {
            if n > 0 {
                lp += n as f64 * p.get(k).ln() - lfact[n as usize];
            }
        }
        lp
    };
    // (llr, P_rival(type), P_j(type)) for types with positive mass
    let mut rows: Vec<(f64, f64, f64)> = Vec::new();
    let mut counts = vec![0u32; cells];
    compositions(length as u32, &mut counts, 0, &mut |c| {
        let a = log_prob(pi, c).exp();
        let b = log_prob(pj, c).exp();
        if a > 0.0 || b > 0.0 {
            rows.push((llr(&weights, c), a, b));
        }
    });
    rows.sort_by(|x, y| x.0.total_cmp(&y.0));

    // largest attained value v with P_rival(LLR < v) ≤ level
    let mut threshold = rows.first().map_or(0.0, |r| r.0);
    let mut below = 0.0;
    let mut k = 0;
    while k < rows.len() {
        let v = rows[k].0;
        if below <= level {
            threshold = v;
        } else {
            break;
        }
        while k < rows.len() && rows[k].0 == v {
            below += rows[k].1;
            k += 1;
        }
    }
    let beta_exact: f64 = rows.iter().filter(|r| r.0 >= threshold).map(|r| r.2).sum();
    let rival_error: f64 = rows.iter().filter(|r| r.0 < threshold).map(|r| r.1).sum();
    Ok(NpTest {
        j,
        rival,
        length,
        level,
        threshold,
        beta_exact: beta_exact.min(1.0),
        rival_error,
        weights,
        sampler: Sampler::new(pj),
    })
}

impl TrialRunner for NpTest {
    fn message_count(&self) -> u64 {
        1
    }

    /// Draws under message `j`; returns 1 when the test keeps `j`.
    fn watermarked(&self, _j: u64, rng: &mut SampleStream) -> u64 {
        let mut counts = vec![0u32; self.weights.len()];
        for _ in 0..self.length {
            counts[self.sampler.sample(rng)] += 1;
        }
        u64::from(self.llr(&counts) < self.threshold)
    }

    fn null(&self, _rng: &mut SampleStream) -> Option<u64> {
        None
    }

    fn false_alarm_worst_case(&self) -> Option<f64> {
        None
    }
}

/// Ordinary least squares `y = intercept + slope·x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// `None` with fewer than three points.
    pub slope_se: Option<f64>,
}

pub fn fit_line(points: &[(f64, f64)]) -> Result<LineFit> {
    let k = points.len();
    if k < 2 {
        return Err(Error::Censored);
    }
    let kf = k as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / kf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / kf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid("T", "need at least two distinct lengths"));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_se = (k > 2).then(|| {
        let ssr: f64 = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
        (ssr / (kf - 2.0) / sxx).sqrt()
    });
    Ok(LineFit {
        slope,
        intercept,
        slope_se,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ExponentPoint {
    #[serde(rename = "T")]
    pub length: usize,
    pub threshold: f64,
    pub beta_exact: f64,
    pub beta_hat: Estimate,
    /// No observed errors, so `-ln β̂` is undefined.
    pub censored: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExponentFit {
    pub j: usize,
    pub rival: usize,
    pub level: f64,
    pub points: Vec<ExponentPoint>,
    /// Slope of `-ln β̂_j` against `T`.
    pub fit: LineFit,
    /// Slope of `-ln β_j` from the exact error probabilities.
    pub exact_fit: Option<LineFit>,
    /// `min_{i≠j} D(P_i‖P_j)` per symbol; may be `+∞`.
    pub bound: f64,
}

/// Monte Carlo error exponent of message `j` for i.i.d. per-symbol joints
/// `joints[0..=m]` (index 0 is the unwatermarked hypothesis).
///
/// Length `T` draws from streams starting at `T << 32`, so adding a length
/// leaves the other points unchanged.
pub fn empirical_exponent(
    joints: &[Pmf<f64>],
    j: usize,
    lengths: &[usize],
    level: f64,
    cfg: &SimConfig,
    limit: MaterializeLimit,
) -> Result<ExponentFit> {
    check_joints(joints, j)?;
    let bound = exponent_bound(joints, j)?;
    let mut points = Vec::with_capacity(lengths.len());
    let mut rival = 0;
    for &t in lengths {
        let test = np_test(joints, j, t, level, limit)?;
        rival = test.rival;
        let run = SimConfig {
            seed: cfg.seed.with_stream(cfg.seed.stream_id.wrapping_add((t as u64) << 32)),
            ..cfg.clone()
        };
        let report = monte_carlo(&test, &run)?;
        let beta_hat = report.beta_hat[0];
        points.push(ExponentPoint {
            length: t,
            threshold: test.threshold,
            beta_exact: test.beta_exact,
            censored: beta_hat.events == 0,
            beta_hat,
        });
    }
    let observed: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| !p.censored)
        .map(|p| (p.length as f64, -p.beta_hat.estimate.ln()))
        .collect();
    let fit = fit_line(&observed)?;
    let exact: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.beta_exact > 0.0)
        .map(|p| (p.length as f64, -p.beta_exact.ln()))
        .collect();
    Ok(ExponentFit {
        j,
        rival,
        level,
        points,
        fit,
        exact_fit: fit_line(&exact).ok(),
        bound,
    })
}

fn binomial(n: usize, k: usize) -> Option<u64> {
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return None;
        }
    }
    Some(acc as u64)
}

fn compositions(total: u32, counts: &mut [u32], pos: usize, visit: &mut impl FnMut(&[u32])) {
    if pos + 1 == counts.len() {
        counts[pos] = total;
        visit(counts);
        return;
    }
    for c in 0..=total {
        counts[pos] = c;
        compositions(total - c, counts, pos + 1, visit);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn family() -> Vec<Pmf<f64>> {
        vec![
            Pmf::from_f64s(&[0.3, 0.2, 0.1, 0.4]).unwrap(),
            Pmf::from_f64s(&[0.45, 0.05, 0.2, 0.3]).unwrap(),
        ]
    }

    #[test]
    fn line_fit_recovers_exact_line() {
        let pts: Vec<(f64, f64)> = (0..5).map(|t| (t as f64, 2.0 + 0.5 * t as f64)).collect();
        let f = fit_line(&pts).unwrap();
        assert_abs_diff_eq!(f.slope, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(f.intercept, 2.0, epsilon = 1e-12);
        assert!(f.slope_se.unwrap() < 1e-7);
        assert!(matches!(fit_line(&pts[..1]), Err(Error::Censored)));
    }

    #[test]
    fn np_test_respects_level_and_matches_brute_force() {
        let joints = family();
        let t = 5;
        let test = np_test(&joints, 1, t, 0.25, MaterializeLimit::default()).unwrap();
        assert_eq!(test.rival, 0);
        assert!(test.rival_error <= 0.25);
        // oracle: sum over all 4^5 sequences
        let mut beta = 0.0;
        for idx in 0..4usize.pow(t as u32) {
            let mut counts = [0u32; 4];
            let mut p = 1.0;
            let mut rest = idx;
            for _ in 0..t {
                counts[rest % 4] += 1;
                p *= joints[1].get(rest % 4);
                rest /= 4;
            }
            if test.llr(&counts) >= test.threshold {
                beta += p;
            }
        }
        assert_abs_diff_eq!(test.beta_exact, beta, epsilon = 1e-12);
    }

    #[test]
    fn identical_hypotheses_have_flat_exponent() {
        let p = Pmf::from_f64s(&[0.5, 0.5]).unwrap();
        let fit = empirical_exponent(
            &[p.clone(), p],
            1,
            &[2, 4, 6],
            0.25,
            &SimConfig::new(2000, 3),
            MaterializeLimit::default(),
        )
        .unwrap();
        assert_abs_diff_eq!(fit.fit.slope, 0.0, epsilon = 1e-12);
        assert_eq!(fit.bound, 0.0);
    }

    #[test]
    fn all_censored_is_an_error() {
        let joints = vec![
            Pmf::from_f64s(&[1.0, 0.0]).unwrap(),
            Pmf::from_f64s(&[0.0, 1.0]).unwrap(),
        ];
        let r = empirical_exponent(
            &joints,
            1,
            &[2, 3],
            0.25,
            &SimConfig::new(100, 1),
            MaterializeLimit::default(),
        );
        assert!(matches!(r, Err(Error::Censored)));
    }
}

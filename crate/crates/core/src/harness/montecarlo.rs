use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::harness::exact::worst_case_false_alarm;
use crate::prob::{MaterializeLimit, Pmf, RngSeed, SampleStream, Sampler};
use crate::scalar::Scalar;
use crate::scheme::{AsymptoticScheme, SchemeBundle};

/// Trials per sampling stream.
pub const BLOCK_TRIALS: u64 = 8192;
/// Stream ids at or above this bit are reserved for null-hypothesis trials.
pub const NULL_STREAM_BIT: u64 = 1 << 63;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Law of the unwatermarked sequence in null-hypothesis trials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum H0Source {
    /// No null trials; the exact worst case over point masses is reported.
    WorstCase,
    /// The scheme's own data law.
    Native,
    /// A caller-supplied law over the scheme's data alphabet (sequences for
    /// finite bundles, symbols for the typical-set scheme).
    Custom(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub trials: u64,
    pub seed: RngSeed,
    pub h0_source: H0Source,
}

impl SimConfig {
    pub fn new(trials: u64, seed: u64) -> Self {
        Self {
            trials,
            seed: RngSeed::new(seed, 0),
            h0_source: H0Source::Native,
        }
    }
}

/// Binomial proportion with a Wilson interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub events: u64,
    pub trials: u64,
    pub estimate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl Estimate {
    /// 95% Wilson interval.
    pub fn new(events: u64, trials: u64) -> Self {
        let (ci_lo, ci_hi) = wilson_interval(events, trials, Z95);
        Self {
            events,
            trials,
            estimate: if trials == 0 {
                0.0
            } else {
                events as f64 / trials as f64
            },
            ci_lo,
            ci_hi,
        }
    }

    /// Whether `value` lies in the Wilson interval at `z` standard errors.
    pub fn covers(&self, value: f64, z: f64) -> bool {
        let (lo, hi) = wilson_interval(self.events, self.trials, z);
        lo <= value && value <= hi
    }
}

/// Wilson score interval for `events / trials` at `z`; `(0, 1)` with no
/// trials.
pub fn wilson_interval(events: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = events as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

#[derive(Clone, Debug, Serialize)]
pub struct SimReport {
    pub trials: u64,
    pub seed: RngSeed,
    /// `β̂_j` for `j = 1..=m`, from the trials that drew message `j`.
    pub beta_hat: Vec<Estimate>,
    pub max_beta_hat: f64,
    /// Empirical false alarm under the configured null law.
    pub false_alarm: Option<Estimate>,
    /// Exact worst-case false alarm, when cheap to enumerate.
    pub false_alarm_worst_case: Option<f64>,
    /// Analytic ceiling on the worst-case false alarm, when one is known.
    pub false_alarm_bound: Option<f64>,
    #[serde(skip)]
    pub wall_clock: Duration,
}

/// One-trial hooks shared by every simulated scheme.
pub trait TrialRunner: Sync {
    fn message_count(&self) -> u64;
    /// Sends message `j` and returns the decoded message.
    fn watermarked(&self, j: u64, rng: &mut SampleStream) -> u64;
    /// Decodes an unwatermarked draw; `None` when null trials are off.
    fn null(&self, rng: &mut SampleStream) -> Option<u64>;
    fn false_alarm_worst_case(&self) -> Option<f64>;
    fn false_alarm_bound(&self) -> Option<f64> {
        None
    }
}

#[derive(Clone, Default)]
struct Tally {
    sent: Vec<u64>,
    errors: Vec<u64>,
    null_trials: u64,
    alarms: u64,
}

impl Tally {
    fn merge(mut self, other: Tally) -> Tally {
        for (a, b) in self.sent.iter_mut().zip(other.sent) {
            *a += b;
        }
        for (a, b) in self.errors.iter_mut().zip(other.errors) {
            *a += b;
        }
        self.null_trials += other.null_trials;
        self.alarms += other.alarms;
        self
    }
}

/// Runs `cfg.trials` watermarked trials (uniform message prior) and, unless
/// the null law is `WorstCase`, `cfg.trials` independent null trials.
///
/// Trials are cut into blocks of [`BLOCK_TRIALS`]; block `b` draws from
/// stream `stream_id + b` (null trials: that id with [`NULL_STREAM_BIT`]
/// set), so results do not depend on thread scheduling.
pub fn monte_carlo<R: TrialRunner>(runner: &R, cfg: &SimConfig) -> Result<SimReport> {
    if cfg.trials == 0 {
        return Err(invalid("trials", "must be >= 1"));
    }
    let m = runner.message_count();
    if m == 0 {
        return Err(invalid("m", "simulation needs at least one message"));
    }
    let start = Instant::now();
    let blocks = cfg.trials.div_ceil(BLOCK_TRIALS);
    let empty = Tally {
        sent: vec![0; m as usize],
        errors: vec![0; m as usize],
        ..Tally::default()
    };
    let tallies: Vec<Tally> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let count = BLOCK_TRIALS.min(cfg.trials - b * BLOCK_TRIALS);
            let stream = cfg.seed.stream_id.wrapping_add(b);
            let mut t = empty.clone();
            let mut rng = cfg.seed.with_stream(stream & !NULL_STREAM_BIT).stream();
            for _ in 0..count {
                let j = rng.random_range(1..=m);
                t.sent[(j - 1) as usize] += 1;
                if runner.watermarked(j, &mut rng) != j {
                    t.errors[(j - 1) as usize] += 1;
                }
            }
            let mut rng = cfg.seed.with_stream(stream | NULL_STREAM_BIT).stream();
            for _ in 0..count {
                match runner.null(&mut rng) {
                    Some(decoded) => {
                        t.null_trials += 1;
                        t.alarms += u64::from(decoded != 0);
                    }
                    None => break,
                }
            }
            t
        })
        .collect();
    let total = tallies.into_iter().fold(empty, Tally::merge);
    let beta_hat: Vec<Estimate> = total
        .errors
        .iter()
        .zip(&total.sent)
        .map(|(&e, &n)| Estimate::new(e, n))
        .collect();
    Ok(SimReport {
        trials: cfg.trials,
        seed: cfg.seed,
        max_beta_hat: beta_hat.iter().map(|e| e.estimate).fold(0.0, f64::max),
        beta_hat,
        false_alarm: (total.null_trials > 0).then(|| Estimate::new(total.alarms, total.null_trials)),
        false_alarm_worst_case: runner.false_alarm_worst_case(),
        false_alarm_bound: runner.false_alarm_bound(),
        wall_clock: start.elapsed(),
    })
}

/// Samples a finite bundle: `(x, ζ)` by inverse CDF over the flattened
/// coupling of the drawn message.
pub struct BundleRunner<'a, F: Scalar> {
    bundle: &'a SchemeBundle<F>,
    cells: Vec<Sampler>,
    null_x: Option<Sampler>,
    zeta: Sampler,
}

impl<'a, F: Scalar> BundleRunner<'a, F> {
    pub fn new(bundle: &'a SchemeBundle<F>, h0: &H0Source) -> Result<Self> {
        let null_x = match h0 {
            H0Source::WorstCase => None,
            H0Source::Native => Some(Sampler::new(&bundle.source)),
            H0Source::Custom(p) => {
                let p = Pmf::<f64>::from_f64s(p)?;
                if p.len() != bundle.n() {
                    return Err(Error::DimensionMismatch {
                        left: p.len(),
                        right: bundle.n(),
                    });
                }
                Some(Sampler::new(&p))
            }
        };
        Ok(Self {
            bundle,
            cells: bundle
                .couplings
                .iter()
                .map(|c| Sampler::from_weights(c.cells().iter().map(|v| v.as_f64())))
                .collect(),
            null_x,
            zeta: Sampler::new(&bundle.p_zeta_star),
        })
    }
}

impl<F: Scalar> TrialRunner for BundleRunner<'_, F> {
    fn message_count(&self) -> u64 {
        self.bundle.m()
    }

    fn watermarked(&self, j: u64, rng: &mut SampleStream) -> u64 {
        let cell = self.cells[(j - 1) as usize].sample(rng);
        let cols = self.bundle.n() + 1;
        self.bundle
            .decoder
            .decode_unchecked((cell / cols) as u64, (cell % cols) as u64)
    }

    fn null(&self, rng: &mut SampleStream) -> Option<u64> {
        let x = self.null_x.as_ref()?.sample(rng);
        let zeta = self.zeta.sample(rng);
        Some(self.bundle.decoder.decode_unchecked(x as u64, zeta as u64))
    }

    fn false_alarm_worst_case(&self) -> Option<f64> {
        Some(worst_case_false_alarm(&self.bundle.decoder, &self.bundle.p_zeta_star).as_f64())
    }
}

/// Largest typical set for which the exact worst-case false alarm of the
/// typical-set scheme is enumerated.
pub const ASYMPTOTIC_EXACT_LIMIT: u64 = 1 << 16;

/// Samples the typical-set scheme through its own encoder and decoder.
pub struct AsymptoticRunner<'a, F: Scalar> {
    scheme: &'a AsymptoticScheme<F>,
    null_symbols: Option<Sampler>,
    worst_case: Option<f64>,
}

impl<'a, F: Scalar> AsymptoticRunner<'a, F> {
    pub fn new(scheme: &'a AsymptoticScheme<F>, h0: &H0Source) -> Result<Self> {
        let null_symbols = match h0 {
            H0Source::WorstCase => None,
            H0Source::Native => Some(Sampler::new(scheme.p_x())),
            H0Source::Custom(p) => {
                let p = Pmf::<f64>::from_f64s(p)?;
                if p.len() != scheme.p_x().len() {
                    return Err(Error::DimensionMismatch {
                        left: p.len(),
                        right: scheme.p_x().len(),
                    });
                }
                Some(Sampler::new(&p))
            }
        };
        let worst_case = if scheme.n_prime() <= ASYMPTOTIC_EXACT_LIMIT {
            Some(
                scheme
                    .worst_case_false_alarm(MaterializeLimit(ASYMPTOTIC_EXACT_LIMIT))?
                    .as_f64(),
            )
        } else {
            None
        };
        Ok(Self {
            scheme,
            null_symbols,
            worst_case,
        })
    }
}

impl<F: Scalar> TrialRunner for AsymptoticRunner<'_, F> {
    fn message_count(&self) -> u64 {
        self.scheme.m()
    }

    fn watermarked(&self, j: u64, rng: &mut SampleStream) -> u64 {
        // j ∈ [1, m] by construction of the trial loop
        let (x, zeta) = self.scheme.encode(j, rng).expect("message in range");
        self.scheme.decode(&x, &zeta)
    }

    fn null(&self, rng: &mut SampleStream) -> Option<u64> {
        let sampler = self.null_symbols.as_ref()?;
        let x: Vec<usize> = (0..self.scheme.length()).map(|_| sampler.sample(rng)).collect();
        let zeta = self.scheme.sample_sequence(rng);
        Some(self.scheme.decode(&x, &zeta))
    }

    fn false_alarm_worst_case(&self) -> Option<f64> {
        self.worst_case
    }

    fn false_alarm_bound(&self) -> Option<f64> {
        Some(self.scheme.false_alarm_bound().as_f64())
    }
}

pub fn simulate_bundle<F: Scalar>(bundle: &SchemeBundle<F>, cfg: &SimConfig) -> Result<SimReport> {
    monte_carlo(&BundleRunner::new(bundle, &cfg.h0_source)?, cfg)
}

pub fn simulate_asymptotic<F: Scalar>(scheme: &AsymptoticScheme<F>, cfg: &SimConfig) -> Result<SimReport> {
    monte_carlo(&AsymptoticRunner::new(scheme, &cfg.h0_source)?, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimize::DistortionMetric;
    use crate::scheme::{build_finite_scheme, DecoderFamily, SchemeParams};
    use approx::assert_abs_diff_eq;

    fn bundle(q: &[f64], m: u64, alpha: f64) -> SchemeBundle<f64> {
        let params = SchemeParams {
            alphabet_size: q.len(),
            length: 1,
            m,
            alpha,
            d: 0.0,
            metric: DistortionMetric::Tv,
            family: DecoderFamily::Cyclic,
            seed: 0,
        };
        build_finite_scheme(&params, &Pmf::from_f64s(q).unwrap(), MaterializeLimit::default()).unwrap()
    }

    #[test]
    fn wilson_examples() {
        let (lo, hi) = wilson_interval(0, 10, Z95);
        assert_eq!(lo, 0.0);
        assert_abs_diff_eq!(hi, 0.2775, epsilon = 1e-4);
        let (lo, hi) = wilson_interval(50, 100, Z95);
        assert_abs_diff_eq!(lo, 0.4038, epsilon = 1e-4);
        assert_abs_diff_eq!(hi, 0.5962, epsilon = 1e-4);
    }

    #[test]
    fn diagonal_bundle_never_errs() {
        let b = bundle(&[0.25; 4], 2, 0.6);
        let r = simulate_bundle(&b, &SimConfig::new(20_000, 1)).unwrap();
        assert!(r.beta_hat.iter().all(|e| e.events == 0));
    }

    #[test]
    fn binary_bundle_matches_exact_error() {
        let b = bundle(&[0.5, 0.5], 2, 0.8);
        let r = simulate_bundle(&b, &SimConfig::new(100_000, 7)).unwrap();
        for e in &r.beta_hat {
            assert!(e.covers(0.2, Z95 + 1.0), "{e:?}");
        }
        let fa = r.false_alarm.unwrap();
        assert!(fa.covers(0.8, 4.0), "{fa:?}");
        assert_abs_diff_eq!(r.false_alarm_worst_case.unwrap(), 0.8, epsilon = 1e-15);
    }

    #[test]
    fn same_seed_same_report() {
        let b = bundle(&[0.6, 0.3, 0.1], 2, 0.5);
        let cfg = SimConfig::new(30_000, 11);
        let a = serde_json::to_string(&simulate_bundle(&b, &cfg).unwrap()).unwrap();
        let c = serde_json::to_string(&simulate_bundle(&b, &cfg).unwrap()).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn zero_trials_is_rejected() {
        let b = bundle(&[0.5, 0.5], 1, 0.5);
        assert!(simulate_bundle(&b, &SimConfig::new(0, 1)).is_err());
    }

    #[test]
    fn worst_case_mode_skips_null_trials() {
        let b = bundle(&[0.5, 0.5], 1, 0.5);
        let cfg = SimConfig {
            h0_source: H0Source::WorstCase,
            ..SimConfig::new(100, 1)
        };
        let r = simulate_bundle(&b, &cfg).unwrap();
        assert!(r.false_alarm.is_none());
        assert!(r.false_alarm_worst_case.is_some());
    }
}

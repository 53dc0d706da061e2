use rand::Rng;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::optimize::check_alpha_m;
use crate::prob::{entropy, MaterializeLimit, Pmf, Sampler};
use crate::scalar::Scalar;
use crate::scheme::typical::{default_eta, TypicalIndex};

/// Distortion-free typical-set scheme.
///
/// The auxiliary law equals the data law, so both typical sets coincide and
/// `n' = |A|`. Message `M` shifts the typical rank cyclically:
/// `rank(ζ) = (rank(x) + M - 1) mod n'`.
#[derive(Clone, Debug)]
pub struct AsymptoticScheme<F: Scalar> {
    p_x: Pmf<F>,
    length: usize,
    m: u64,
    alpha: F,
    index: TypicalIndex<F>,
    symbol_sampler: Sampler,
    rate: RateCondition,
}

/// `(ln m - ln α) / T ≤ H(P)`; a violation is reported, not rejected.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateCondition {
    pub lhs: f64,
    pub entropy: f64,
    pub holds: bool,
}

/// Builds the scheme with the default radius `η = T^{-1/4}`.
pub fn build_asymptotic_scheme<F: Scalar>(
    p_x_star: &Pmf<F>,
    length: usize,
    m: u64,
    alpha: F,
    limit: MaterializeLimit,
) -> Result<AsymptoticScheme<F>> {
    AsymptoticScheme::with_eta(p_x_star, length, m, alpha, default_eta(length), limit)
}

impl<F: Scalar> AsymptoticScheme<F> {
    pub fn with_eta(
        p_x_star: &Pmf<F>,
        length: usize,
        m: u64,
        alpha: F,
        eta: F,
        limit: MaterializeLimit,
    ) -> Result<Self> {
        check_alpha_m(alpha, m)?;
        let index = TypicalIndex::new(p_x_star, length, eta, limit)?;
        let h = entropy(p_x_star).as_f64();
        let lhs = ((m as f64).ln() - alpha.as_f64().ln()) / length as f64;
        Ok(Self {
            p_x: p_x_star.clone(),
            length,
            m,
            alpha,
            symbol_sampler: Sampler::new(p_x_star),
            index,
            rate: RateCondition {
                lhs,
                entropy: h,
                holds: lhs <= h,
            },
        })
    }

    pub fn p_x(&self) -> &Pmf<F> {
        &self.p_x
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn alpha(&self) -> F {
        self.alpha
    }

    pub fn index(&self) -> &TypicalIndex<F> {
        &self.index
    }

    pub fn rate_condition(&self) -> RateCondition {
        self.rate
    }

    /// `n'`, the common truncated size of both typical sets.
    pub fn n_prime(&self) -> u64 {
        self.index.total_size()
    }

    /// Draws an i.i.d. sequence from the data law.
    pub fn sample_sequence<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        (0..self.length).map(|_| self.symbol_sampler.sample(rng)).collect()
    }

    /// Encodes message `j ∈ [1, m]` and returns `(x, ζ)`.
    pub fn encode<R: Rng + ?Sized>(&self, j: u64, rng: &mut R) -> Result<(Vec<usize>, Vec<usize>)> {
        if j == 0 || j > self.m {
            return Err(invalid("j", format!("message {j} outside [1, {}]", self.m)));
        }
        let x = self.sample_sequence(rng);
        let zeta = match self.index.rank(&x) {
            Some(i) => {
                let n = self.n_prime() as u128;
                let k = (i as u128 + (j as u128 - 1)) % n;
                self.index.unrank(k as u64)?
            }
            None => self.sample_sequence(rng),
        };
        Ok((x, zeta))
    }

    /// Returns the decoded message, or 0 when either sequence is atypical
    /// or the cyclic offset exceeds `m`.
    pub fn decode(&self, x: &[usize], zeta: &[usize]) -> u64 {
        match (self.index.rank(x), self.index.rank(zeta)) {
            (Some(i), Some(k)) => {
                let n = self.n_prime();
                let offset = ((k as u128 + n as u128 - i as u128) % n as u128) as u64 + 1;
                if offset <= self.m {
                    offset
                } else {
                    0
                }
            }
            _ => 0,
        }
    }

    /// Exact `β_j`: a typical `x` always decodes correctly when `j ≤ n'`,
    /// and an atypical `x` always decodes to 0.
    pub fn exact_error(&self, j: u64) -> F {
        if j > self.n_prime() {
            F::one()
        } else {
            (F::one() - self.index.typical_mass()).max(F::zero())
        }
    }

    /// `min(1, m · max_x p^T(x))` over typical `x`: each typical `x`
    /// accepts at most `m` typical `ζ`.
    pub fn false_alarm_bound(&self) -> F {
        (F::lit(self.m as f64) * self.index.max_sequence_prob()).min(F::one())
    }

    /// Exact worst-case false alarm, `max_x Σ_{ζ accepted for x} p^T(ζ)`,
    /// by a circular window over all typical ranks.
    pub fn worst_case_false_alarm(&self, limit: MaterializeLimit) -> Result<F> {
        let n = self.n_prime();
        if n == 0 {
            return Ok(F::zero());
        }
        limit.check(n)?;
        let probs: Vec<f64> = (0..n)
            .map(|k| {
                let seq = self.index.unrank(k)?;
                Ok(self.sequence_prob(&seq).as_f64())
            })
            .collect::<Result<_>>()?;
        let w = self.m.min(n) as usize;
        let n = n as usize;
        let mut window: f64 = probs[..w].iter().sum();
        let mut best = window;
        for i in 1..n {
            window += probs[(i + w - 1) % n] - probs[i - 1];
            best = best.max(window);
        }
        Ok(F::lit(best.clamp(0.0, 1.0)))
    }

    pub fn sequence_prob(&self, seq: &[usize]) -> F {
        let mut c = vec![0u32; self.p_x.len()];
        for &s in seq {
            c[s] += 1;
        }
        self.index.class_prob(&c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::RngSeed;
    use approx::assert_abs_diff_eq;

    #[test]
    fn uniform_source_always_recovers() {
        let p = Pmf::<f64>::uniform(2).unwrap();
        let s = build_asymptotic_scheme(&p, 8, 1, 0.5, MaterializeLimit::default()).unwrap();
        let mut rng = RngSeed::new(1, 0).stream();
        for _ in 0..500 {
            let (x, z) = s.encode(1, &mut rng).unwrap();
            assert_eq!(s.decode(&x, &z), 1);
        }
        assert_eq!(s.exact_error(1), 0.0);
    }

    #[test]
    fn every_message_round_trips_on_typical_draws() {
        let p = Pmf::<f64>::from_f64s(&[0.7, 0.3]).unwrap();
        let s = build_asymptotic_scheme(&p, 12, 4, 0.1, MaterializeLimit::default()).unwrap();
        let mut rng = RngSeed::new(2, 0).stream();
        for j in 1..=4 {
            for _ in 0..100 {
                let (x, z) = s.encode(j, &mut rng).unwrap();
                let got = s.decode(&x, &z);
                if s.index().is_typical(&x) {
                    assert_eq!(got, j);
                } else {
                    assert_eq!(got, 0);
                }
            }
        }
    }

    #[test]
    fn worst_case_false_alarm_respects_bound() {
        let p = Pmf::<f64>::from_f64s(&[0.7, 0.3]).unwrap();
        let s = build_asymptotic_scheme(&p, 10, 2, 0.1, MaterializeLimit::default()).unwrap();
        let exact = s.worst_case_false_alarm(MaterializeLimit::default()).unwrap();
        assert!(exact <= s.false_alarm_bound() + 1e-15);
        assert!(exact > 0.0);
    }

    #[test]
    fn rate_condition_is_flagged() {
        let p = Pmf::<f64>::from_f64s(&[0.9, 0.1]).unwrap();
        let s = build_asymptotic_scheme(&p, 2, 8, 0.01, MaterializeLimit::default()).unwrap();
        assert!(!s.rate_condition().holds);
        let s = build_asymptotic_scheme(
            &Pmf::<f64>::uniform(2).unwrap(),
            16,
            2,
            0.5,
            MaterializeLimit::default(),
        )
        .unwrap();
        assert!(s.rate_condition().holds);
        assert_abs_diff_eq!(s.rate_condition().entropy, 2f64.ln(), epsilon = 1e-15);
    }
}

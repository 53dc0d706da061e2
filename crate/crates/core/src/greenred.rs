//! Green/red-list baseline watermark with a one-token context window.
//!
//! The previous token and a secret key seed a pseudorandom "green" subset
//! of `ρV` tokens; generation multiplies green probabilities by `e^δ`, and
//! detection counts green tokens and applies a one-sided z-test.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{invalid, Error, Result};
use crate::harness::{Estimate, BLOCK_TRIALS};
use crate::prob::{kl_divergence, Pmf, RngSeed, Sampler};
use crate::scalar::{stable_sum, Scalar};

/// Context token before the first generated token.
pub const INITIAL_CONTEXT: usize = 0;
/// Largest number of masks enumerated exactly by [`distortion_of`].
pub const EXACT_MASK_LIMIT: u64 = 1 << 16;
/// Masks drawn when enumeration is too large.
pub const MASK_SAMPLES: usize = 20_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct GreenRedParams<F: Scalar> {
    pub vocab: usize,
    pub rho: F,
    pub delta: F,
    pub key: u64,
}

impl<F: Scalar> GreenRedParams<F> {
    pub fn new(vocab: usize, rho: F, delta: F, key: u64) -> Result<Self> {
        let p = Self { vocab, rho, delta, key };
        p.green_count()?;
        if delta.is_nan() || delta < F::zero() {
            return Err(invalid("delta", "logit boost must be >= 0"));
        }
        Ok(p)
    }

    /// `ρV`, which must be an integer in `[1, V-1]`.
    pub fn green_count(&self) -> Result<usize> {
        let g = self.rho.as_f64() * self.vocab as f64;
        let r = g.round();
        if (g - r).abs() > 1e-9 || r < 1.0 || r > self.vocab as f64 - 1.0 {
            return Err(invalid("rho", format!("rho * V = {g} must be an integer in [1, V-1]")));
        }
        Ok(r as usize)
    }

    pub fn with_key(self, key: u64) -> Self {
        Self { key, ..self }
    }

    pub fn with_delta(self, delta: F) -> Self {
        Self { delta, ..self }
    }
}

/// splitmix64 finalizer.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Keyed 64-bit hash of the context token.
pub fn context_hash(prev_token: usize, key: u64) -> u64 {
    splitmix64(splitmix64(key) ^ prev_token as u64)
}

/// Uniform `ρV`-subset chosen by a partial Fisher–Yates shuffle seeded by
/// [`context_hash`].
pub fn green_mask<F: Scalar>(prev_token: usize, params: &GreenRedParams<F>) -> Result<Vec<bool>> {
    if prev_token >= params.vocab {
        return Err(Error::IndexOutOfRange {
            index: prev_token as u64,
            bound: params.vocab as u64,
        });
    }
    let g = params.green_count()?;
    let mut rng = ChaCha8Rng::seed_from_u64(context_hash(prev_token, params.key));
    Ok(random_subset(params.vocab, g, &mut rng))
}

fn random_subset<R: Rng + ?Sized>(v: usize, g: usize, rng: &mut R) -> Vec<bool> {
    let mut order: Vec<usize> = (0..v).collect();
    for i in 0..g {
        let k = rng.random_range(i..v);
        order.swap(i, k);
    }
    let mut mask = vec![false; v];
    for &s in &order[..g] {
        mask[s] = true;
    }
    mask
}

/// `P(x) ∝ q(x)·e^{δ·1{green}}`.
pub fn tilt<F: Scalar>(q: &Pmf<F>, mask: &[bool], delta: F) -> Result<Pmf<F>> {
    if mask.len() != q.len() {
        return Err(Error::DimensionMismatch {
            left: mask.len(),
            right: q.len(),
        });
    }
    let boost = delta.exp();
    let w: Vec<F> = q
        .iter()
        .zip(mask)
        .map(|(p, &green)| if green { p * boost } else { p })
        .collect();
    let total = stable_sum(w.iter().copied());
    Pmf::new(w.into_iter().map(|x| x / total).collect())
}

/// Samples `T` tokens, each from `q` tilted by the mask of its predecessor;
/// the first token's context is [`INITIAL_CONTEXT`].
pub fn generate<F: Scalar, R: Rng + ?Sized>(
    q: &Pmf<F>,
    length: usize,
    params: &GreenRedParams<F>,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if length == 0 {
        return Err(invalid("T", "sequence length must be >= 1"));
    }
    if q.len() != params.vocab {
        return Err(Error::DimensionMismatch {
            left: q.len(),
            right: params.vocab,
        });
    }
    let mut samplers: Vec<Option<Sampler>> = vec![None; params.vocab];
    let mut prev = INITIAL_CONTEXT;
    let mut out = Vec::with_capacity(length);
    for _ in 0..length {
        if samplers[prev].is_none() {
            let mask = green_mask(prev, params)?;
            samplers[prev] = Some(Sampler::new(&tilt(q, &mask, params.delta)?));
        }
        let x = samplers[prev].as_ref().map(|s| s.sample(rng)).unwrap_or_default();
        out.push(x);
        prev = x;
    }
    Ok(out)
}

/// `(g - ρT) / √(Tρ(1-ρ))`.
pub fn z_score(green: usize, length: usize, rho: f64) -> f64 {
    let t = length as f64;
    (green as f64 - rho * t) / (t * rho * (1.0 - rho)).sqrt()
}

/// One-sided normal quantile `z_{1-α}`.
pub fn z_threshold(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid("alpha", "must lie in (0, 1)"));
    }
    let normal = Normal::new(0.0, 1.0).map_err(|e| invalid("alpha", e.to_string()))?;
    Ok(normal.inverse_cdf(1.0 - alpha))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Detection {
    pub z: f64,
    pub threshold: f64,
    pub detected: bool,
    pub green: usize,
    #[serde(rename = "T")]
    pub length: usize,
    pub initial_context: usize,
}

/// Counts green tokens (each scored against its predecessor's mask, the
/// first against [`INITIAL_CONTEXT`]) and tests `z > z_{1-α}`.
pub fn detect_z<F: Scalar>(tokens: &[usize], params: &GreenRedParams<F>, alpha: f64) -> Result<Detection> {
    if tokens.len() < 2 {
        return Err(invalid("T", "detection needs at least two tokens"));
    }
    let threshold = z_threshold(alpha)?;
    let mut masks: Vec<Option<Vec<bool>>> = vec![None; params.vocab];
    let mut prev = INITIAL_CONTEXT;
    let mut green = 0;
    for &x in tokens {
        if x >= params.vocab {
            return Err(Error::IndexOutOfRange {
                index: x as u64,
                bound: params.vocab as u64,
            });
        }
        if masks[prev].is_none() {
            masks[prev] = Some(green_mask(prev, params)?);
        }
        if masks[prev].as_ref().is_some_and(|m| m[x]) {
            green += 1;
        }
        prev = x;
    }
    let z = z_score(green, tokens.len(), params.rho.as_f64());
    Ok(Detection {
        z,
        threshold,
        detected: z > threshold,
        green,
        length: tokens.len(),
        initial_context: INITIAL_CONTEXT,
    })
}

/// Expected per-token `D(tilt(q, mask, δ) ‖ q)` over a uniformly random
/// green subset: exact over all `C(V, ρV)` subsets up to
/// [`EXACT_MASK_LIMIT`], otherwise averaged over [`MASK_SAMPLES`] subsets
/// drawn from `seed`.
pub fn distortion_of<F: Scalar>(q: &Pmf<F>, params: &GreenRedParams<F>, seed: u64) -> Result<F> {
    if q.len() != params.vocab {
        return Err(Error::DimensionMismatch {
            left: q.len(),
            right: params.vocab,
        });
    }
    let g = params.green_count()?;
    let v = params.vocab;
    let kl = |mask: &[bool]| -> Result<F> { kl_divergence(&tilt(q, mask, params.delta)?, q) };
    if choose(v, g).is_some_and(|c| c <= EXACT_MASK_LIMIT) {
        let mut values = Vec::new();
        let mut idx: Vec<usize> = (0..g).collect();
        loop {
            let mut mask = vec![false; v];
            for &i in &idx {
                mask[i] = true;
            }
            values.push(kl(&mask)?);
            if !next_combination(&mut idx, v) {
                break;
            }
        }
        let n = F::lit(values.len() as f64);
        Ok(stable_sum(values) / n)
    } else {
        let mut rng = RngSeed::new(seed, 0).stream();
        let values = (0..MASK_SAMPLES)
            .map(|_| kl(&random_subset(v, g, &mut rng)))
            .collect::<Result<Vec<F>>>()?;
        Ok(stable_sum(values) / F::lit(MASK_SAMPLES as f64))
    }
}

fn choose(n: usize, k: usize) -> Option<u64> {
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return None;
        }
    }
    Some(acc as u64)
}

/// Advances `idx` to the next `k`-combination of `0..n` in lexicographic
/// order; `false` after the last one.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < n - k + i {
            idx[i] += 1;
            for t in i + 1..k {
                idx[t] = idx[t - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Fraction of `trials` generated sequences flagged by the detector, with a
/// fresh random key per trial. Block `b` of [`BLOCK_TRIALS`] trials draws
/// from stream `b` of `seed`.
pub fn detection_rate<F: Scalar>(
    q: &Pmf<F>,
    length: usize,
    params: &GreenRedParams<F>,
    alpha: f64,
    trials: u64,
    seed: u64,
) -> Result<Estimate> {
    if trials == 0 {
        return Err(invalid("trials", "must be >= 1"));
    }
    let blocks = trials.div_ceil(BLOCK_TRIALS);
    let hits = (0..blocks)
        .into_par_iter()
        .map(|b| -> Result<u64> {
            let mut rng = RngSeed::new(seed, b).stream();
            let mut hits = 0;
            for _ in 0..BLOCK_TRIALS.min(trials - b * BLOCK_TRIALS) {
                let p = params.with_key(rng.random());
                let tokens = generate(q, length, &p, &mut rng)?;
                hits += u64::from(detect_z(&tokens, &p, alpha)?.detected);
            }
            Ok(hits)
        })
        .collect::<Result<Vec<u64>>>()?
        .into_iter()
        .sum();
    Ok(Estimate::new(hits, trials))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn params(v: usize, rho: f64, delta: f64, key: u64) -> GreenRedParams<f64> {
        GreenRedParams::new(v, rho, delta, key).unwrap()
    }

    #[test]
    fn mask_is_deterministic_with_exact_size() {
        let p = params(4, 0.5, 1.0, 42);
        let a = green_mask(3, &p).unwrap();
        assert_eq!(a, green_mask(3, &p).unwrap());
        assert_eq!(a.iter().filter(|&&b| b).count(), 2);
        assert!(green_mask(4, &p).is_err());
    }

    #[test]
    fn green_count_must_be_integral() {
        assert!(GreenRedParams::new(4, 0.3, 1.0, 0).is_err());
        assert!(GreenRedParams::new(4, 1.0, 1.0, 0).is_err());
        assert!(GreenRedParams::new(4, 0.25, -1.0, 0).is_err());
    }

    #[test]
    fn tilt_examples() {
        let q = Pmf::<f64>::from_f64s(&[0.5, 0.5]).unwrap();
        let p = tilt(&q, &[true, false], 2f64.ln()).unwrap();
        assert_abs_diff_eq!(p.get(0), 2.0 / 3.0, epsilon = 1e-15);
        let q = Pmf::<f64>::from_f64s(&[0.6, 0.3, 0.1]).unwrap();
        assert_eq!(tilt(&q, &[true, false, true], 0.0).unwrap(), q);
        let all = tilt(&q, &[true; 3], 3.0).unwrap();
        for (a, b) in all.iter().zip(q.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn z_examples() {
        assert_abs_diff_eq!(z_score(65, 100, 0.5), 3.0, epsilon = 1e-12);
        assert_eq!(z_score(50, 100, 0.5), 0.0);
        assert_abs_diff_eq!(z_threshold(0.05).unwrap(), 1.644_853_626_951_472_2, epsilon = 1e-9);
        let p = params(4, 0.5, 1.0, 1);
        assert!(detect_z(&[1], &p, 0.05).is_err());
    }

    #[test]
    fn detection_counts_against_previous_masks() {
        let p = params(6, 0.5, 0.0, 17);
        let tokens = [2usize, 5, 0, 0, 3];
        let mut prev = INITIAL_CONTEXT;
        let mut green = 0;
        for &x in &tokens {
            green += usize::from(green_mask(prev, &p).unwrap()[x]);
            prev = x;
        }
        assert_eq!(detect_z(&tokens, &p, 0.05).unwrap().green, green);
    }

    #[test]
    fn generation_is_seeded() {
        let q = Pmf::<f64>::from_f64s(&[0.4, 0.3, 0.2, 0.1]).unwrap();
        let p = params(4, 0.5, 2.0, 5);
        let a = generate(&q, 50, &p, &mut RngSeed::new(1, 0).stream()).unwrap();
        let b = generate(&q, 50, &p, &mut RngSeed::new(1, 0).stream()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn distortion_examples() {
        let q = Pmf::<f64>::uniform(2).unwrap();
        assert_eq!(distortion_of(&q, &params(2, 0.5, 0.0, 0), 0).unwrap(), 0.0);
        // both masks give KL((2/3, 1/3) ‖ (1/2, 1/2))
        let want = (2.0 / 3.0) * (4.0f64 / 3.0).ln() + (1.0 / 3.0) * (2.0f64 / 3.0).ln();
        let got = distortion_of(&q, &params(2, 0.5, 2f64.ln(), 0), 0).unwrap();
        assert_abs_diff_eq!(got, want, epsilon = 1e-15);
    }

    #[test]
    fn combinations_enumerate_all_subsets() {
        let mut idx = vec![0, 1];
        let mut n = 1;
        while next_combination(&mut idx, 5) {
            n += 1;
        }
        assert_eq!(n, 10);
    }
}

use std::collections::HashMap;

use crate::error::{invalid, Error, Result};
use crate::prob::{entropy, MaterializeLimit, Pmf, SequenceSpace};
use crate::scalar::{stable_sum, Scalar};

/// Default typicality radius `T^{-1/4}`.
pub fn default_eta<F: Scalar>(length: usize) -> F {
    F::lit((length as f64).powf(-0.25))
}

/// Typical set of `p^T`: sequences with `|-(1/T) ln p^T(x) - H(p)| ≤ η`.
///
/// Typicality depends only on the type (symbol counts), so the set is a
/// union of type classes. Sequences are ranked lexicographically over the
/// whole union.
#[derive(Clone, Debug)]
pub struct TypicalIndex<F: Scalar> {
    source: Pmf<F>,
    length: usize,
    eta: F,
    classes: Vec<Vec<u32>>,
    sizes: Vec<u64>,
    lookup: HashMap<Vec<u32>, usize>,
    total_size: u64,
    binom: Vec<Vec<u128>>,
}

impl<F: Scalar> TypicalIndex<F> {
    /// Enumerates all `C(T+V-1, V-1)` types; their count is charged
    /// against `limit`.
    pub fn new(source: &Pmf<F>, length: usize, eta: F, limit: MaterializeLimit) -> Result<Self> {
        if length == 0 {
            return Err(invalid("T", "sequence length must be >= 1"));
        }
        if eta.is_nan() || eta < F::zero() {
            return Err(invalid("eta", "typicality radius must be >= 0"));
        }
        let v = source.len();
        let space = SequenceSpace::new(v, length)?;
        let binom = binomial_table(length + v)?;
        let type_count = binom[length + v - 1][v - 1];
        limit.check(u64::try_from(type_count).unwrap_or(u64::MAX))?;

        let h = entropy(source);
        let t = F::lit(length as f64);
        let logs: Vec<F> = source.iter().map(|p| p.ln()).collect();
        let mut classes = Vec::new();
        let mut counts = vec![0u32; v];
        for_each_composition(length as u32, &mut counts, 0, &mut |c| {
            let mut ll = F::zero();
            for (k, &n) in c.iter().enumerate() {
                if n > 0 {
                    ll = ll + F::lit(n as f64) * logs[k];
                }
            }
            if ll.is_finite() && (-ll / t - h).abs() <= eta + F::lit(F::ROUNDING_SLACK) {
                classes.push(c.to_vec());
            }
        });

        let mut sizes = Vec::with_capacity(classes.len());
        let mut total: u64 = 0;
        for c in &classes {
            let s = multinomial(&binom, c).ok_or_else(|| overflow(space))?;
            let s = u64::try_from(s).map_err(|_| overflow(space))?;
            total = total.checked_add(s).ok_or_else(|| overflow(space))?;
            sizes.push(s);
        }
        let lookup = classes.iter().cloned().enumerate().map(|(i, c)| (c, i)).collect();
        Ok(Self {
            source: source.clone(),
            length,
            eta,
            classes,
            sizes,
            lookup,
            total_size: total,
            binom,
        })
    }

    pub fn source(&self) -> &Pmf<F> {
        &self.source
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn eta(&self) -> F {
        self.eta
    }

    pub fn total_size(&self) -> u64 {
        self.total_size
    }

    /// Typical type classes as symbol-count vectors.
    pub fn classes(&self) -> &[Vec<u32>] {
        &self.classes
    }

    pub fn class_sizes(&self) -> &[u64] {
        &self.sizes
    }

    /// `p^T(typical set)`.
    pub fn typical_mass(&self) -> F {
        stable_sum(
            self.classes
                .iter()
                .zip(&self.sizes)
                .map(|(c, &s)| F::lit(s as f64) * self.class_prob(c)),
        )
    }

    /// Largest single-sequence probability inside the set.
    pub fn max_sequence_prob(&self) -> F {
        self.classes.iter().map(|c| self.class_prob(c)).fold(F::zero(), F::max)
    }

    /// Probability of any one sequence with counts `c`.
    pub fn class_prob(&self, c: &[u32]) -> F {
        let mut ll = F::zero();
        for (k, &n) in c.iter().enumerate() {
            if n > 0 {
                ll = ll + F::lit(n as f64) * self.source.get(k).ln();
            }
        }
        ll.exp()
    }

    fn counts_of(&self, seq: &[usize]) -> Option<Vec<u32>> {
        if seq.len() != self.length {
            return None;
        }
        let mut c = vec![0u32; self.source.len()];
        for &s in seq {
            *c.get_mut(s)? += 1;
        }
        Some(c)
    }

    pub fn is_typical(&self, seq: &[usize]) -> bool {
        self.counts_of(seq).is_some_and(|c| self.lookup.contains_key(&c))
    }

    /// Number of typical completions of a prefix with counts `prefix` and
    /// `remaining` free positions.
    fn completions(&self, prefix: &[u32], remaining: u32) -> u128 {
        let mut total = 0u128;
        let mut rest = vec![0u32; prefix.len()];
        'class: for c in &self.classes {
            let mut sum = 0;
            for k in 0..c.len() {
                if c[k] < prefix[k] {
                    continue 'class;
                }
                rest[k] = c[k] - prefix[k];
                sum += rest[k];
            }
            if sum == remaining {
                // bounded by V^T, which fits in u64
                total += multinomial(&self.binom, &rest).unwrap_or(0);
            }
        }
        total
    }

    /// Lexicographic rank among typical sequences, `None` if `seq` is not
    /// typical.
    pub fn rank(&self, seq: &[usize]) -> Option<u64> {
        if !self.is_typical(seq) {
            return None;
        }
        let v = self.source.len();
        let mut prefix = vec![0u32; v];
        let mut rank = 0u128;
        for (t, &s) in seq.iter().enumerate() {
            let remaining = (self.length - t - 1) as u32;
            for smaller in 0..s {
                prefix[smaller] += 1;
                rank += self.completions(&prefix, remaining);
                prefix[smaller] -= 1;
            }
            prefix[s] += 1;
        }
        Some(rank as u64)
    }

    /// Inverse of [`rank`](Self::rank).
    pub fn unrank(&self, rank: u64) -> Result<Vec<usize>> {
        if rank >= self.total_size {
            return Err(Error::IndexOutOfRange {
                index: rank,
                bound: self.total_size,
            });
        }
        let v = self.source.len();
        let mut prefix = vec![0u32; v];
        let mut left = rank as u128;
        let mut out = Vec::with_capacity(self.length);
        for t in 0..self.length {
            let remaining = (self.length - t - 1) as u32;
            let mut chosen = None;
            for s in 0..v {
                prefix[s] += 1;
                let block = self.completions(&prefix, remaining);
                if left < block {
                    chosen = Some(s);
                    break;
                }
                left -= block;
                prefix[s] -= 1;
            }
            // the rank bound guarantees some symbol's block contains `left`
            out.push(chosen.expect("rank within total size"));
        }
        Ok(out)
    }
}

fn overflow(space: SequenceSpace) -> Error {
    invalid("T", format!("typical set of {:?} does not fit in u64", space))
}

fn binomial_table(n: usize) -> Result<Vec<Vec<u128>>> {
    let mut table = vec![vec![0u128; n + 1]; n + 1];
    for i in 0..=n {
        table[i][0] = 1;
        for k in 1..=i {
            table[i][k] = table[i - 1][k - 1]
                .checked_add(table[i - 1][k])
                .ok_or_else(|| invalid("T", "binomial coefficients overflow u128"))?;
        }
    }
    Ok(table)
}

/// `(Σc)! / Π c_k!` as a product of binomials; `None` on overflow.
fn multinomial(binom: &[Vec<u128>], c: &[u32]) -> Option<u128> {
    let mut n: usize = c.iter().map(|&k| k as usize).sum();
    let mut acc = 1u128;
    for &k in c {
        acc = acc.checked_mul(binom[n][k as usize])?;
        n -= k as usize;
    }
    Some(acc)
}

/// Visits every composition of `total` into `counts.len()` parts in
/// lexicographic order of the count vectors.
fn for_each_composition(total: u32, counts: &mut [u32], pos: usize, visit: &mut impl FnMut(&[u32])) {
    if pos + 1 == counts.len() {
        counts[pos] = total;
        visit(counts);
        return;
    }
    for k in 0..=total {
        counts[pos] = k;
        for_each_composition(total - k, counts, pos + 1, visit);
    }
    counts[pos] = 0;
}

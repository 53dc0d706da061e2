use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Latin-square family behind the decoder `h(x, ζ)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoderFamily {
    /// `h = ((x + ζ) mod n) + 1`
    Cyclic,
    /// `h = ((x + c·ζ) mod n) + 1` with `c` the least primitive root of a
    /// prime `n` (`c = 1` otherwise).
    ModularField,
}

impl fmt::Display for DecoderFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Cyclic => "cyclic",
            Self::ModularField => "modular_field",
        })
    }
}

impl FromStr for DecoderFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "cyclic" => Ok(Self::Cyclic),
            "modular_field" | "modular" => Ok(Self::ModularField),
            other => Err(invalid("family", format!("unknown decoder family `{other}`"))),
        }
    }
}

/// Decoder over `n` data sequences and `n + 1` auxiliary values, the last
/// of which is the redundant value `ζ̃` that always decodes to 0.
///
/// Message `j`'s matching is `{(x, ζ) : h(x, ζ) = j}`. Message 1's matching
/// is the alignment used to build the auxiliary distribution, so message 1
/// is the aligned message.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecoderSpec {
    pub family: DecoderFamily,
    pub n: u64,
    pub m: u64,
    pub redundant_index: u64,
    multiplier: u64,
    multiplier_inv: u64,
}

/// The message whose matching pairs `ζ` with its aligned `x`.
pub const ALIGNED_MESSAGE: u64 = 1;

impl DecoderSpec {
    /// `m = 0` is accepted and yields the decoder that never accepts.
    pub fn new(family: DecoderFamily, n: u64, m: u64) -> Result<Self> {
        if n == 0 {
            return Err(invalid("n", "sequence space must be non-empty"));
        }
        if m > n {
            return Err(Error::MessageSetTooLarge { m, n });
        }
        let multiplier = match family {
            DecoderFamily::Cyclic => 1,
            DecoderFamily::ModularField => {
                if n > 2 && is_prime(n) {
                    primitive_root(n)
                } else {
                    1
                }
            }
        };
        let multiplier_inv = if multiplier == 1 {
            1
        } else {
            mod_pow(multiplier, n - 2, n)
        };
        Ok(Self {
            family,
            n,
            m,
            redundant_index: n,
            multiplier,
            multiplier_inv,
        })
    }

    pub fn multiplier(&self) -> u64 {
        self.multiplier
    }

    /// Size of the auxiliary space (`n + 1`).
    pub fn zeta_size(&self) -> u64 {
        self.n + 1
    }

    /// Latin-square label in `[1, n]` for a non-redundant `ζ`.
    #[inline]
    pub fn h(&self, x: u64, zeta: u64) -> u64 {
        let n = self.n as u128;
        let v = (x as u128 + self.multiplier as u128 * zeta as u128) % n;
        v as u64 + 1
    }

    /// Decoded message in `[0, m]`; bounds are not checked.
    #[inline]
    pub fn decode_unchecked(&self, x: u64, zeta: u64) -> u64 {
        if zeta == self.redundant_index {
            return 0;
        }
        let h = self.h(x, zeta);
        if h <= self.m {
            h
        } else {
            0
        }
    }

    pub fn decode(&self, x: u64, zeta: u64) -> Result<u64> {
        if x >= self.n {
            return Err(Error::IndexOutOfRange {
                index: x,
                bound: self.n,
            });
        }
        if zeta > self.n {
            return Err(Error::IndexOutOfRange {
                index: zeta,
                bound: self.n + 1,
            });
        }
        Ok(self.decode_unchecked(x, zeta))
    }

    /// The `ζ` matched to `x` under message `j` (`h(x, ζ) = j`), for
    /// `j ∈ [1, n]`.
    #[inline]
    pub fn zeta_for(&self, j: u64, x: u64) -> u64 {
        let n = self.n as u128;
        let diff = ((j as u128 - 1) + n - (x as u128 % n)) % n;
        (diff * self.multiplier_inv as u128 % n) as u64
    }

    /// The `x` matched to a non-redundant `ζ` under message `j`.
    #[inline]
    pub fn x_for(&self, j: u64, zeta: u64) -> u64 {
        let n = self.n as u128;
        let shift = self.multiplier as u128 * zeta as u128 % n;
        (((j as u128 - 1) + n - shift) % n) as u64
    }

    /// The `x` paired with `ζ` when building the auxiliary distribution.
    #[inline]
    pub fn aligned_x(&self, zeta: u64) -> u64 {
        self.x_for(ALIGNED_MESSAGE, zeta)
    }

    /// `alignment[ζ]` = aligned `x`, for every non-redundant `ζ`.
    pub fn alignment(&self) -> Vec<u64> {
        (0..self.n).map(|z| self.aligned_x(z)).collect()
    }
}

fn mod_mul(a: u64, b: u64, n: u64) -> u64 {
    (a as u128 * b as u128 % n as u128) as u64
}

fn mod_pow(mut base: u64, mut exp: u64, n: u64) -> u64 {
    let mut acc = 1 % n;
    base %= n;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mod_mul(acc, base, n);
        }
        base = mod_mul(base, base, n);
        exp >>= 1;
    }
    acc
}

pub(crate) fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n.is_multiple_of(2) {
        return n == 2;
    }
    let mut d = 3u64;
    while d.saturating_mul(d) <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

fn prime_factors(mut v: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2u64;
    while d.saturating_mul(d) <= v {
        if v.is_multiple_of(d) {
            out.push(d);
            while v.is_multiple_of(d) {
                v /= d;
            }
        }
        d += 1;
    }
    if v > 1 {
        out.push(v);
    }
    out
}

/// Least primitive root of the prime `p`.
pub(crate) fn primitive_root(p: u64) -> u64 {
    let order = p - 1;
    let factors = prime_factors(order);
    (2..p)
        .find(|&g| factors.iter().all(|&f| mod_pow(g, order / f, p) != 1))
        .unwrap_or(1)
}

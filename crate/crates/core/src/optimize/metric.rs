use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{kl_divergence, tv_distance, Pmf};
use crate::scalar::Scalar;

/// Distortion between the watermarked marginal and the source.
///
/// `KlForward` is `D(P ‖ Q)` with the watermarked distribution first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistortionMetric {
    Tv,
    #[serde(rename = "kl")]
    KlForward,
}

impl DistortionMetric {
    pub fn evaluate<F: Scalar>(self, p: &Pmf<F>, q: &Pmf<F>) -> Result<F> {
        match self {
            Self::Tv => tv_distance(p, q),
            Self::KlForward => kl_divergence(p, q),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Tv => "tv",
            Self::KlForward => "kl",
        }
    }
}

impl fmt::Display for DistortionMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DistortionMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tv" => Ok(Self::Tv),
            "kl" | "kl_forward" => Ok(Self::KlForward),
            _ => Err(Error::UnsupportedMetric(s.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_supported_and_rejects_others() {
        assert_eq!("tv".parse::<DistortionMetric>().unwrap(), DistortionMetric::Tv);
        assert_eq!("KL".parse::<DistortionMetric>().unwrap(), DistortionMetric::KlForward);
        assert!(matches!(
            "wasserstein".parse::<DistortionMetric>(),
            Err(Error::UnsupportedMetric(_))
        ));
    }

    #[test]
    fn evaluation_matches_measures() {
        let p = Pmf::<f64>::from_f64s(&[0.5, 0.5]).unwrap();
        let q = Pmf::<f64>::from_f64s(&[0.9, 0.1]).unwrap();
        assert_eq!(
            DistortionMetric::Tv.evaluate(&p, &q).unwrap(),
            tv_distance(&p, &q).unwrap()
        );
        assert_eq!(
            DistortionMetric::KlForward.evaluate(&p, &q).unwrap(),
            kl_divergence(&p, &q).unwrap()
        );
    }
}

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::optimize::{beta_star_of, check_alpha_m, minimize_overhang, DistortionMetric, OptimizerReport};
use crate::prob::{iid_extension, MaterializeLimit, Pmf, SequenceSpace};
use crate::scalar::Scalar;
use crate::scheme::{build_coupling, build_pzeta_star_for, CouplingTable, DecoderFamily, DecoderSpec};

/// Magic header of the binary coupling dump.
pub const COUPLING_MAGIC: &[u8; 8] = b"DEMBCPL1";

/// Parameters of a finite-length scheme.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SchemeParams<F: Scalar> {
    #[serde(rename = "V")]
    pub alphabet_size: usize,
    #[serde(rename = "T")]
    pub length: usize,
    pub m: u64,
    pub alpha: F,
    pub d: F,
    pub metric: DistortionMetric,
    pub family: DecoderFamily,
    pub seed: u64,
}

/// A finite-length optimal scheme: source, optimized marginals, decoder and
/// one coupling per message.
#[derive(Clone, Debug)]
pub struct SchemeBundle<F: Scalar> {
    pub params: SchemeParams<F>,
    /// Source over the `V^T` sequences.
    pub source: Pmf<F>,
    pub p_x_star: Pmf<F>,
    pub p_zeta_star: Pmf<F>,
    pub decoder: DecoderSpec,
    pub couplings: Vec<CouplingTable<F>>,
    pub beta_star: F,
    pub optimizer: OptimizerReport<F>,
}

impl<F: Scalar> SchemeBundle<F> {
    pub fn n(&self) -> usize {
        self.decoder.n as usize
    }

    pub fn m(&self) -> u64 {
        self.decoder.m
    }

    pub fn tau(&self) -> F {
        self.params.alpha / F::lit(self.params.m as f64)
    }

    pub fn coupling(&self, j: u64) -> &CouplingTable<F> {
        &self.couplings[(j - 1) as usize]
    }
}

fn check_params<F: Scalar>(params: &SchemeParams<F>) -> Result<SequenceSpace> {
    check_alpha_m(params.alpha, params.m)?;
    if params.d.is_nan() || params.d < F::zero() {
        return Err(invalid("d", "distortion budget must be >= 0"));
    }
    SequenceSpace::new(params.alphabet_size, params.length)
}

/// Brings a per-symbol source (`len = V`) to the sequence space; a
/// sequence-level source (`len = V^T`) passes through.
pub fn sequence_source<F: Scalar>(source: &Pmf<F>, space: SequenceSpace, limit: MaterializeLimit) -> Result<Pmf<F>> {
    if source.len() as u64 == space.size() {
        Ok(source.clone())
    } else if source.len() == space.alphabet_size() {
        iid_extension(source, space, limit)
    } else {
        Err(Error::DimensionMismatch {
            left: source.len(),
            right: space.alphabet_size(),
        })
    }
}

/// Builds the optimal `d`-distorted scheme: minimizes the overhang over the
/// distortion ball, then derives `P_ζ*`, the decoder and every coupling.
pub fn build_finite_scheme<F: Scalar>(
    params: &SchemeParams<F>,
    source: &Pmf<F>,
    limit: MaterializeLimit,
) -> Result<SchemeBundle<F>> {
    let space = check_params(params)?;
    let n = space.size();
    if params.m > n {
        return Err(Error::MessageSetTooLarge { m: params.m, n });
    }
    limit.check(n + 1)?;
    limit.check(n.saturating_mul(n + 1))?;

    let q = sequence_source(source, space, limit)?;
    let optimizer = minimize_overhang(&q, params.alpha, params.m, params.d, params.metric)?;
    if !optimizer.converged {
        return Err(invalid(
            "d",
            format!("optimizer did not converge after {} iterations", optimizer.iterations),
        ));
    }
    let p_x_star = optimizer.argmin_or_argmax.clone();
    finish_bundle(params.clone(), q, p_x_star, optimizer)
}

fn finish_bundle<F: Scalar>(
    params: SchemeParams<F>,
    source: Pmf<F>,
    p_x_star: Pmf<F>,
    optimizer: OptimizerReport<F>,
) -> Result<SchemeBundle<F>> {
    let n = p_x_star.len() as u64;
    let decoder = DecoderSpec::new(params.family, n, params.m)?;
    let tau = params.alpha / F::lit(params.m as f64);
    let p_zeta_star = build_pzeta_star_for(&p_x_star, tau, &decoder)?;
    let couplings = (1..=params.m)
        .into_par_iter()
        .map(|j| build_coupling(j, &p_x_star, &p_zeta_star, &decoder))
        .collect::<Result<Vec<_>>>()?;
    let beta_star = beta_star_of(&p_x_star, params.alpha, params.m)?;
    Ok(SchemeBundle {
        params,
        source,
        p_x_star,
        p_zeta_star,
        decoder,
        couplings,
        beta_star,
        optimizer,
    })
}

/// JSON manifest of a bundle. Couplings are rebuilt on load, since they are
/// a deterministic function of the marginals and decoder.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BundleManifest<F: Scalar> {
    pub schema_version: String,
    pub params: SchemeParams<F>,
    pub beta_star: F,
    pub decoder: DecoderSpec,
    pub source: Pmf<F>,
    pub p_x_star: Pmf<F>,
    pub p_zeta_star: Pmf<F>,
    pub optimizer_objective: F,
    pub optimizer_constraint: F,
    pub optimizer_iterations: usize,
    pub residual_masses: Vec<F>,
}

impl<F: Scalar> SchemeBundle<F> {
    pub fn manifest(&self) -> BundleManifest<F> {
        BundleManifest {
            schema_version: "1".into(),
            params: self.params.clone(),
            beta_star: self.beta_star,
            decoder: self.decoder.clone(),
            source: self.source.clone(),
            p_x_star: self.p_x_star.clone(),
            p_zeta_star: self.p_zeta_star.clone(),
            optimizer_objective: self.optimizer.objective_value,
            optimizer_constraint: self.optimizer.constraint_value,
            optimizer_iterations: self.optimizer.iterations,
            residual_masses: self.couplings.iter().map(|c| c.residual_mass).collect(),
        }
    }

    pub fn from_manifest(manifest: BundleManifest<F>, limit: MaterializeLimit) -> Result<Self> {
        let n = manifest.p_x_star.len() as u64;
        limit.check(n.saturating_mul(n + 1))?;
        let optimizer = OptimizerReport {
            argmin_or_argmax: manifest.p_x_star.clone(),
            objective_value: manifest.optimizer_objective,
            constraint_value: manifest.optimizer_constraint,
            iterations: manifest.optimizer_iterations,
            kkt_residual: None,
            converged: true,
        };
        let bundle = finish_bundle(manifest.params, manifest.source, manifest.p_x_star, optimizer)?;
        if bundle.decoder != manifest.decoder {
            return Err(invalid("decoder", "manifest decoder does not match its parameters"));
        }
        Ok(bundle)
    }

    pub fn write_manifest<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, &self.manifest())?;
        Ok(())
    }

    pub fn read_manifest<R: Read>(reader: R, limit: MaterializeLimit) -> Result<Self> {
        let manifest: BundleManifest<F> = serde_json::from_reader(reader)?;
        if manifest.schema_version != "1" {
            return Err(invalid(
                "schema_version",
                format!("unsupported `{}`", manifest.schema_version),
            ));
        }
        Self::from_manifest(manifest, limit)
    }

    /// Binary dump: magic `DEMBCPL1`, then `n`, `n + 1` and `m` as
    /// little-endian `u64`, then each message's table as row-major
    /// little-endian `f64`.
    pub fn write_couplings<W: Write>(&self, mut writer: W) -> Result<()> {
        writer.write_all(COUPLING_MAGIC)?;
        let n = self.n() as u64;
        for v in [n, n + 1, self.m()] {
            writer.write_all(&v.to_le_bytes())?;
        }
        for c in &self.couplings {
            for v in c.cells() {
                writer.write_all(&v.as_f64().to_le_bytes())?;
            }
        }
        Ok(())
    }
}

/// Reads a binary coupling dump into `(n, cols, tables)`.
pub fn read_couplings<R: Read>(mut reader: R) -> Result<(usize, usize, Vec<Vec<f64>>)> {
    let mut magic = [0u8; 8];
    reader.read_exact(&mut magic)?;
    if &magic != COUPLING_MAGIC {
        return Err(invalid("couplings", "bad magic header"));
    }
    let mut word = [0u8; 8];
    let mut next = |r: &mut R| -> Result<u64> {
        r.read_exact(&mut word)?;
        Ok(u64::from_le_bytes(word))
    };
    let n = next(&mut reader)? as usize;
    let cols = next(&mut reader)? as usize;
    let m = next(&mut reader)? as usize;
    let mut tables = Vec::with_capacity(m);
    for _ in 0..m {
        let mut t = Vec::with_capacity(n * cols);
        for _ in 0..n * cols {
            t.push(f64::from_bits(next(&mut reader)?));
        }
        tables.push(t);
    }
    Ok((n, cols, tables))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn params(v: usize, t: usize, m: u64, alpha: f64, d: f64, metric: DistortionMetric) -> SchemeParams<f64> {
        SchemeParams {
            alphabet_size: v,
            length: t,
            m,
            alpha,
            d,
            metric,
            family: DecoderFamily::Cyclic,
            seed: 0,
        }
    }

    #[test]
    fn binary_uniform_bundle() {
        let q = Pmf::<f64>::uniform(2).unwrap();
        let b = build_finite_scheme(
            &params(2, 1, 2, 0.8, 0.0, DistortionMetric::Tv),
            &q,
            MaterializeLimit::default(),
        )
        .unwrap();
        assert_abs_diff_eq!(b.beta_star, 0.2, epsilon = 1e-15);
        assert_eq!(b.couplings.len(), 2);
    }

    #[test]
    fn full_message_set_with_uniform_source() {
        let q = Pmf::<f64>::uniform(2).unwrap();
        // m = V^T = 8, α/m = 0.1 ≥ 1/8? no: pick α = 0.99 so τ ≈ 0.124 < 0.125
        let b = build_finite_scheme(
            &params(2, 3, 8, 0.99, 0.0, DistortionMetric::Tv),
            &q,
            MaterializeLimit::default(),
        )
        .unwrap();
        assert!(b.beta_star > 0.0);
        // and with τ ≥ 1/8 we would need α ≥ 1, so use m = 4 instead
        let b = build_finite_scheme(
            &params(2, 3, 4, 0.5, 0.0, DistortionMetric::Tv),
            &q,
            MaterializeLimit::default(),
        )
        .unwrap();
        assert_eq!(b.beta_star, 0.0);
    }

    #[test]
    fn message_set_larger_than_space_is_rejected() {
        let q = Pmf::<f64>::uniform(2).unwrap();
        let err = build_finite_scheme(
            &params(2, 2, 5, 0.5, 0.0, DistortionMetric::Tv),
            &q,
            MaterializeLimit::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::MessageSetTooLarge { m: 5, n: 4 }));
    }

    #[test]
    fn manifest_round_trip_rebuilds_couplings() {
        let q = Pmf::<f64>::from_f64s(&[0.5, 0.3, 0.2]).unwrap();
        let b = build_finite_scheme(
            &params(3, 2, 3, 0.3, 0.05, DistortionMetric::Tv),
            &q,
            MaterializeLimit::default(),
        )
        .unwrap();
        let mut buf = Vec::new();
        b.write_manifest(&mut buf).unwrap();
        let back = SchemeBundle::<f64>::read_manifest(&buf[..], MaterializeLimit::default()).unwrap();
        assert_eq!(back.p_zeta_star, b.p_zeta_star);
        assert_eq!(back.beta_star, b.beta_star);
        for (a, c) in back.couplings.iter().zip(&b.couplings) {
            assert_eq!(a.cells(), c.cells());
        }
    }

    #[test]
    fn binary_dump_round_trip() {
        let q = Pmf::<f64>::from_f64s(&[0.7, 0.3]).unwrap();
        let b = build_finite_scheme(
            &params(2, 2, 2, 0.5, 0.0, DistortionMetric::Tv),
            &q,
            MaterializeLimit::default(),
        )
        .unwrap();
        let mut buf = Vec::new();
        b.write_couplings(&mut buf).unwrap();
        assert_eq!(&buf[..8], b"DEMBCPL1");
        assert_eq!(buf.len(), 8 + 24 + 2 * 4 * 5 * 8);
        let (n, cols, tables) = read_couplings(&buf[..]).unwrap();
        assert_eq!((n, cols, tables.len()), (4, 5, 2));
        assert_eq!(tables[1], b.couplings[1].cells().to_vec());
        assert!(read_couplings(&b"NOTMAGIC"[..]).is_err());
    }
}

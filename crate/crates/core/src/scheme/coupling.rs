use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::prob::{overhang, Pmf};
use crate::scalar::{stable_sum, Scalar};
use crate::scheme::DecoderSpec;

/// Joint law of `(x, ζ)` under one message, stored densely as an
/// `n × (n + 1)` row-major table.
#[derive(Clone, Debug, Serialize)]
pub struct CouplingTable<F: Scalar> {
    pub message: u64,
    n: usize,
    #[serde(skip)]
    table: Vec<F>,
    pub x_marginal: Pmf<F>,
    pub zeta_marginal: Pmf<F>,
    /// Unmatched mass `r_j = Σ_x excess(x)`.
    pub residual_mass: F,
}

impl<F: Scalar> CouplingTable<F> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cols(&self) -> usize {
        self.n + 1
    }

    #[inline]
    pub fn get(&self, x: usize, zeta: usize) -> F {
        self.table[x * (self.n + 1) + zeta]
    }

    /// Row-major cells.
    pub fn cells(&self) -> &[F] {
        &self.table
    }

    pub fn total(&self) -> F {
        stable_sum(self.table.iter().copied())
    }

    pub fn row_sums(&self) -> Vec<F> {
        self.table
            .chunks(self.n + 1)
            .map(|row| stable_sum(row.iter().copied()))
            .collect()
    }

    pub fn col_sums(&self) -> Vec<F> {
        let cols = self.n + 1;
        (0..cols)
            .map(|z| stable_sum((0..self.n).map(|x| self.table[x * cols + z])))
            .collect()
    }

    /// Largest absolute deviation of a row or column sum from the stored
    /// marginals.
    pub fn max_marginal_deviation(&self) -> F {
        let rows = self
            .row_sums()
            .into_iter()
            .zip(self.x_marginal.iter())
            .map(|(a, b)| (a - b).abs());
        let cols = self
            .col_sums()
            .into_iter()
            .zip(self.zeta_marginal.iter())
            .map(|(a, b)| (a - b).abs());
        rows.chain(cols).fold(F::zero(), F::max)
    }

    /// Mass on cells that `spec` decodes to this table's message.
    pub fn decoded_mass(&self, spec: &DecoderSpec) -> F {
        let cols = self.n + 1;
        stable_sum(self.table.iter().enumerate().filter_map(|(i, &v)| {
            let (x, z) = ((i / cols) as u64, (i % cols) as u64);
            (spec.decode_unchecked(x, z) == self.message).then_some(v)
        }))
    }

    /// The table flattened into a PMF over `n·(n+1)` cells.
    pub fn as_joint(&self) -> Result<Pmf<F>> {
        Pmf::new(self.table.clone())
    }
}

/// `P_ζ*`: each non-redundant `ζ` gets `min(P(aligned x), τ)` and the
/// redundant value gets `overhang(P, τ)`.
pub fn build_pzeta_star_for<F: Scalar>(p_x_star: &Pmf<F>, tau: F, decoder: &DecoderSpec) -> Result<Pmf<F>> {
    if p_x_star.len() as u64 != decoder.n {
        return Err(Error::DimensionMismatch {
            left: p_x_star.len(),
            right: decoder.n as usize,
        });
    }
    let mut out: Vec<F> = (0..decoder.n)
        .map(|z| p_x_star.get(decoder.aligned_x(z) as usize).min(tau))
        .collect();
    out.push(overhang(p_x_star, tau));
    Pmf::new(out)
}

/// [`build_pzeta_star_for`] with the identity alignment (`ζ_k ↔ x_k`).
pub fn build_pzeta_star<F: Scalar>(p_x_star: &Pmf<F>, alpha: F, m: u64) -> Result<Pmf<F>> {
    let tau = crate::optimize::check_alpha_m(alpha, m)?;
    let mut out: Vec<F> = p_x_star.iter().map(|p| p.min(tau)).collect();
    out.push(overhang(p_x_star, tau));
    Pmf::new(out)
}

/// Coupling for message `j` with marginals `p_x_star` and `p_zeta_star`.
///
/// Matched cells (`decode = j`) carry `min(P_X(x), P_ζ(ζ))`. The leftover
/// row mass `excess(x)` and column mass `deficit(ζ)` are joined by the
/// product `excess·deficit / r_j`, where `r_j` is the total leftover, so
/// both marginals hold exactly for every message.
pub fn build_coupling<F: Scalar>(
    j: u64,
    p_x_star: &Pmf<F>,
    p_zeta_star: &Pmf<F>,
    spec: &DecoderSpec,
) -> Result<CouplingTable<F>> {
    let n = spec.n as usize;
    if p_x_star.len() != n {
        return Err(Error::DimensionMismatch {
            left: p_x_star.len(),
            right: n,
        });
    }
    if p_zeta_star.len() != n + 1 {
        return Err(Error::DimensionMismatch {
            left: p_zeta_star.len(),
            right: n + 1,
        });
    }
    if j == 0 || j > spec.m {
        return Err(invalid("j", format!("message {j} outside [1, {}]", spec.m)));
    }
    let cols = n + 1;
    let px = p_x_star.probs();
    let pz = p_zeta_star.probs();

    let matched: Vec<usize> = (0..n).map(|x| spec.zeta_for(j, x as u64) as usize).collect();
    let excess: Vec<F> = (0..n).map(|x| (px[x] - pz[matched[x]]).positive_part()).collect();
    let deficit: Vec<F> = (0..cols)
        .map(|z| {
            if z == n {
                pz[z]
            } else {
                (pz[z] - px[spec.x_for(j, z as u64) as usize]).positive_part()
            }
        })
        .collect();
    let residual = stable_sum(excess.iter().copied());

    let mut table = vec![F::zero(); n * cols];
    for x in 0..n {
        table[x * cols + matched[x]] = px[x].min(pz[matched[x]]);
    }
    if residual > F::zero() {
        let receivers: Vec<usize> = (0..cols).filter(|&z| deficit[z] > F::zero()).collect();
        for x in (0..n).filter(|&x| excess[x] > F::zero()) {
            let scale = excess[x] / residual;
            for &z in &receivers {
                table[x * cols + z] = table[x * cols + z] + scale * deficit[z];
            }
        }
    }

    Ok(CouplingTable {
        message: j,
        n,
        table,
        x_marginal: p_x_star.clone(),
        zeta_marginal: p_zeta_star.clone(),
        residual_mass: residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheme::DecoderFamily;
    use approx::assert_abs_diff_eq;

    fn pmf(v: &[f64]) -> Pmf<f64> {
        Pmf::from_f64s(v).unwrap()
    }

    #[test]
    fn pzeta_examples() {
        let p = build_pzeta_star(&pmf(&[0.5, 0.5]), 0.6, 1).unwrap();
        assert_eq!(p.probs(), &[0.5, 0.5, 0.0]);

        let p = build_pzeta_star(&pmf(&[0.7, 0.3]), 0.8, 2).unwrap();
        for (got, want) in p.iter().zip([0.4, 0.3, 0.3]) {
            assert_abs_diff_eq!(got, want, epsilon = 1e-15);
        }

        let p = build_pzeta_star(&Pmf::<f64>::point_mass(4, 0).unwrap(), 0.25, 1).unwrap();
        for (got, want) in p.iter().zip([0.25, 0.0, 0.0, 0.0, 0.75]) {
            assert_abs_diff_eq!(got, want, epsilon = 1e-15);
        }
    }

    #[test]
    fn hand_enumerated_coupling() {
        let spec = DecoderSpec::new(DecoderFamily::Cyclic, 2, 2).unwrap();
        let px = pmf(&[0.5, 0.5]);
        let pz = build_pzeta_star_for(&px, 0.4, &spec).unwrap();
        for (got, want) in pz.iter().zip([0.4, 0.4, 0.2]) {
            assert_abs_diff_eq!(got, want, epsilon = 1e-15);
        }
        let t = build_coupling(1, &px, &pz, &spec).unwrap();
        let want = [[0.4, 0.0, 0.1], [0.0, 0.4, 0.1]];
        for (x, row) in want.iter().enumerate() {
            for (z, &w) in row.iter().enumerate() {
                assert_abs_diff_eq!(t.get(x, z), w, epsilon = 1e-15);
            }
        }
        assert!(t.max_marginal_deviation() < 1e-15);
        assert_abs_diff_eq!(1.0 - t.decoded_mass(&spec), 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(t.residual_mass, 0.2, epsilon = 1e-15);
    }

    #[test]
    fn uniform_source_gives_diagonal_only() {
        let spec = DecoderSpec::new(DecoderFamily::Cyclic, 4, 2).unwrap();
        let px = Pmf::<f64>::uniform(4).unwrap();
        let pz = build_pzeta_star_for(&px, 0.3, &spec).unwrap();
        for j in 1..=2 {
            let t = build_coupling(j, &px, &pz, &spec).unwrap();
            assert_eq!(t.residual_mass, 0.0);
            assert_abs_diff_eq!(t.decoded_mass(&spec), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn point_mass_coupling() {
        let spec = DecoderSpec::new(DecoderFamily::Cyclic, 3, 1).unwrap();
        let px = Pmf::<f64>::point_mass(3, 0).unwrap();
        let pz = build_pzeta_star_for(&px, 0.25, &spec).unwrap();
        let t = build_coupling(1, &px, &pz, &spec).unwrap();
        let z = spec.zeta_for(1, 0) as usize;
        assert_abs_diff_eq!(t.get(0, z), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(t.get(0, 3), 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(t.total(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn rejects_inconsistent_inputs() {
        let spec = DecoderSpec::new(DecoderFamily::Cyclic, 2, 2).unwrap();
        let px = pmf(&[0.5, 0.5]);
        assert!(build_coupling(1, &px, &px, &spec).is_err());
        let pz = pmf(&[0.4, 0.4, 0.2]);
        assert!(build_coupling(3, &px, &pz, &spec).is_err());
        assert!(build_coupling(0, &px, &pz, &spec).is_err());
    }
}

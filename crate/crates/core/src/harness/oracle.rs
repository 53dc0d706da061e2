use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::optimize::{beta_star_of, check_alpha_m};
use crate::prob::Pmf;

/// Largest data space the oracle accepts.
pub const ORACLE_MAX_N: usize = 3;
/// Largest message count the oracle accepts.
pub const ORACLE_MAX_M: u64 = 2;

const LIMITATION: &str = "acceptance regions restricted to one perfect matching per message \
between data values and non-redundant auxiliary values; general decoders are not searched";

/// Result of [`brute_force_minmax`].
#[derive(Clone, Debug, Serialize)]
pub struct OracleReport {
    /// `min` over candidates of `max_j β_j`.
    pub value: f64,
    pub beta_star: f64,
    pub grid_step: f64,
    /// `value - β*`; at least `-(n+1)·grid_step` by the converse.
    pub gap: f64,
    pub argmin_p_zeta: Vec<f64>,
    /// `matchings[j-1][x]` = auxiliary value accepted as message `j` for `x`.
    pub argmin_matchings: Vec<Vec<usize>>,
    pub argmin_beta: Vec<f64>,
    pub candidates: u64,
    pub limitation: String,
}

type Candidate = (f64, Vec<f64>, Vec<Vec<usize>>, Vec<f64>);

/// Exhaustive min-max search over matching-structured decoders and a grid
/// of auxiliary laws.
///
/// Each message `j` accepts the pairs `(x, σ_j(x))` for a permutation `σ_j`
/// of the `n` non-redundant auxiliary values, with `σ_i(x) ≠ σ_j(x)`. The
/// auxiliary law ranges over the `(n+1)`-simplex at `grid_step`, subject to
/// accepted mass `Σ_j P_ζ(σ_j(x)) ≤ α` for each `x`. For fixed marginals the
/// best coupling puts `Σ_x min(p_x(x), P_ζ(σ_j(x)))` on the matching.
pub fn brute_force_minmax(p_x: &Pmf<f64>, alpha: f64, m: u64, grid_step: f64) -> Result<OracleReport> {
    check_alpha_m(alpha, m)?;
    let n = p_x.len();
    if n > ORACLE_MAX_N || m > ORACLE_MAX_M {
        return Err(Error::InstanceTooLarge(format!(
            "n = {n}, m = {m} (limits n <= {ORACLE_MAX_N}, m <= {ORACLE_MAX_M})"
        )));
    }
    if m > n as u64 {
        return Err(Error::MessageSetTooLarge { m, n: n as u64 });
    }
    if !(grid_step > 0.0 && grid_step <= 1.0) {
        return Err(invalid("grid_step", "must lie in (0, 1]"));
    }
    let k = (1.0 / grid_step).round() as u32;
    if ((k as f64) * grid_step - 1.0).abs() > 1e-9 {
        return Err(invalid("grid_step", "must be 1/K for an integer K"));
    }

    let perms = permutations(n);
    let mut tuples: Vec<Vec<&Vec<usize>>> = Vec::new();
    for a in &perms {
        if m == 1 {
            tuples.push(vec![a]);
            continue;
        }
        for b in &perms {
            if (0..n).all(|x| a[x] != b[x]) {
                tuples.push(vec![a, b]);
            }
        }
    }

    let px = p_x.probs();
    let slack = 1e-12;
    // (max β, P_ζ, matchings, β per message)
    let mut best: Option<Candidate> = None;
    let mut candidates = 0u64;
    let mut grid = vec![0u32; n + 1];
    for_each_grid_point(k, &mut grid, 0, &mut |g| {
        let pz: Vec<f64> = g.iter().map(|&c| c as f64 / k as f64).collect();
        for tuple in &tuples {
            let feasible = (0..n).all(|x| tuple.iter().map(|s| pz[s[x]]).sum::<f64>() <= alpha + slack);
            if !feasible {
                continue;
            }
            candidates += 1;
            let betas: Vec<f64> = tuple
                .iter()
                .map(|s| 1.0 - (0..n).map(|x| px[x].min(pz[s[x]])).sum::<f64>())
                .collect();
            let worst = betas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if best.as_ref().is_none_or(|b| worst < b.0) {
                best = Some((worst, pz.clone(), tuple.iter().map(|s| s.to_vec()).collect(), betas));
            }
        }
    });

    // the all-redundant law is always feasible, so some candidate exists
    let (value, argmin_p_zeta, argmin_matchings, argmin_beta) = best.expect("feasible candidate");
    let beta_star = beta_star_of(p_x, alpha, m)?;
    Ok(OracleReport {
        value,
        beta_star,
        grid_step,
        gap: value - beta_star,
        argmin_p_zeta,
        argmin_matchings,
        argmin_beta,
        candidates,
        limitation: LIMITATION.into(),
    })
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn for_each_grid_point(total: u32, counts: &mut [u32], pos: usize, visit: &mut impl FnMut(&[u32])) {
    if pos + 1 == counts.len() {
        counts[pos] = total;
        visit(counts);
        return;
    }
    for c in 0..=total {
        counts[pos] = c;
        for_each_grid_point(total - c, counts, pos + 1, visit);
    }
}

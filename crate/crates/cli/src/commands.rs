use std::fs::{self, File};
use std::io::BufReader;
use std::path::Path;

use anyhow::{Context, Result};
use dembed_core::greenred::{detect_z, detection_rate, distortion_of, generate, GreenRedParams, INITIAL_CONTEXT};
use dembed_core::harness::{
    brute_force_minmax, bundle_exponent_bounds, empirical_exponent, simulate_asymptotic, simulate_bundle, sweep_rows,
    validate as validate_bundle, H0Source, SimConfig, SweepRow, SWEEP_COLUMNS,
};
use dembed_core::optimize::{
    beta_star_of, maximize_entropy, minimize_overhang, tv_overhang_closed_form, DistortionMetric,
};
use dembed_core::prob::{entropy, MaterializeLimit, RngSeed, SequenceSpace, DEFAULT_MATERIALIZE_LIMIT};
use dembed_core::scheme::{
    build_finite_scheme, default_eta, sequence_source, AsymptoticScheme, DecoderFamily, SchemeParams,
};
use dembed_core::{Pmf64, SchemeBundle64};
use serde_json::{json, Value};

use crate::output::{bits, emit, fmt_num, num, write_csv, write_json};
use crate::{config_error, BaselineCmd, ExponentCmd, NullLaw, OptimizeMode, SchemeArgs, SourceArgs};

/// Environment override of the dense-table cap.
pub const LIMIT_ENV: &str = "DEMBED_MATERIALIZE_LIMIT";

fn limit() -> Result<MaterializeLimit> {
    match std::env::var(LIMIT_ENV) {
        Ok(s) => s
            .trim()
            .parse::<u64>()
            .map(MaterializeLimit)
            .map_err(|_| config_error(format!("{LIMIT_ENV} must be an unsigned integer, got `{s}`"))),
        Err(_) => Ok(MaterializeLimit(DEFAULT_MATERIALIZE_LIMIT)),
    }
}

fn load_pmf(source: &SourceArgs) -> Result<Pmf64> {
    let values: Vec<f64> = match (&source.pmf, &source.pmf_file) {
        (Some(v), _) => v.clone(),
        (None, Some(path)) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))?
        }
        (None, None) => return Err(config_error("one of --pmf or --pmf-file is required")),
    };
    Ok(Pmf64::from_f64s(&values)?)
}

/// A per-symbol source whose length must equal `--V` when given.
fn symbol_pmf(source: &SourceArgs) -> Result<(Pmf64, usize)> {
    let p = load_pmf(source)?;
    let v = source.v.unwrap_or(p.len());
    if p.len() != v {
        return Err(config_error(format!("--pmf has {} entries but --V is {v}", p.len())));
    }
    Ok((p, v))
}

/// The source on `V^T` sequences, from either a per-symbol or a
/// sequence-level PMF.
fn sequence_pmf(source: &SourceArgs, t: usize) -> Result<(Pmf64, usize)> {
    let p = load_pmf(source)?;
    let v = source.v.unwrap_or(p.len());
    let space = SequenceSpace::new(v, t)?;
    Ok((sequence_source(&p, space, limit()?)?, v))
}

fn read_bundle(path: &Path) -> Result<SchemeBundle64> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(SchemeBundle64::read_manifest(BufReader::new(file), limit()?)?)
}

pub fn beta_star(source: &SourceArgs, t: usize, alpha: f64, m: u64, out: Option<&Path>) -> Result<u8> {
    let (q, v) = sequence_pmf(source, t)?;
    let b = beta_star_of(&q, alpha, m)?;
    println!("{}", fmt_num(b));
    if let Some(out) = out {
        let report = json!({
            "V": v, "T": t, "m": m, "alpha": alpha, "tau": alpha / m as f64, "beta_star": b,
        });
        write_json("beta-star", report, Some(out))?;
    }
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
pub fn optimize(
    mode: OptimizeMode,
    source: &SourceArgs,
    t: usize,
    alpha: Option<f64>,
    m: Option<u64>,
    d: f64,
    metric: DistortionMetric,
    out: Option<&Path>,
) -> Result<u8> {
    let report = match mode {
        OptimizeMode::MinOverhang => {
            let (alpha, m) = alpha
                .zip(m)
                .ok_or_else(|| config_error("min-overhang needs --alpha and --m"))?;
            let (q, v) = sequence_pmf(source, t)?;
            let r = minimize_overhang(&q, alpha, m, d, metric)?;
            let tau = alpha / m as f64;
            let closed = (metric == DistortionMetric::Tv).then(|| tv_overhang_closed_form(&q, tau, d));
            json!({
                "mode": "min-overhang", "V": v, "T": t, "m": m, "alpha": alpha, "tau": tau,
                "d": d, "metric": metric.as_str(),
                "argmin": r.argmin_or_argmax, "objective_value": r.objective_value,
                "constraint_value": r.constraint_value, "iterations": r.iterations,
                "kkt_residual": r.kkt_residual, "converged": r.converged,
                "tv_closed_form": closed,
            })
        }
        OptimizeMode::MaxEntropy => {
            let (q, v) = symbol_pmf(source)?;
            if t == 0 {
                return Err(config_error("--T must be >= 1"));
            }
            // KL tensorizes over i.i.d. symbols; TV is applied per symbol
            let per_symbol = match metric {
                DistortionMetric::KlForward => d / t as f64,
                DistortionMetric::Tv => d,
            };
            let r = maximize_entropy(&q, per_symbol, metric)?;
            let constraint_bits = match metric {
                DistortionMetric::KlForward => Some(bits(r.constraint_value)),
                DistortionMetric::Tv => None,
            };
            json!({
                "mode": "max-entropy", "V": v, "T": t, "d": d, "per_symbol_budget": per_symbol,
                "metric": metric.as_str(), "argmax": r.argmin_or_argmax,
                "entropy_nats": r.objective_value, "entropy_bits": bits(r.objective_value),
                "source_entropy_bits": bits(entropy(&q)),
                "constraint_value": r.constraint_value, "constraint_bits": constraint_bits,
                "iterations": r.iterations, "kkt_residual": r.kkt_residual, "converged": r.converged,
            })
        }
    };
    write_json("optimize", report, out)?;
    Ok(0)
}

fn build_bundle(args: &SchemeArgs) -> Result<SchemeBundle64> {
    let p = load_pmf(&args.source)?;
    let v = args.source.v.unwrap_or(p.len());
    let params = SchemeParams {
        alphabet_size: v,
        length: args.t,
        m: args.m,
        alpha: args.alpha,
        d: args.d,
        metric: args.metric,
        family: args.family,
        seed: args.seed,
    };
    Ok(build_finite_scheme(&params, &p, limit()?)?)
}

pub fn build(args: &SchemeArgs, out: Option<&Path>, couplings: Option<&Path>) -> Result<u8> {
    let bundle = build_bundle(args)?;
    let mut text = serde_json::to_string_pretty(&bundle.manifest())?;
    text.push('\n');
    emit(text.as_bytes(), out)?;
    if let Some(path) = couplings {
        let mut bytes = Vec::new();
        bundle.write_couplings(&mut bytes)?;
        emit(&bytes, Some(path))?;
    }
    Ok(0)
}

pub fn validate(path: &Path, strict: bool, out: Option<&Path>) -> Result<u8> {
    let bundle = read_bundle(path)?;
    let report = validate_bundle(&bundle);
    let ok = report.all_ok();
    write_json("validate", &report, out)?;
    Ok(if strict && !ok { 3 } else { 0 })
}

pub fn simulate(
    path: &Path,
    trials: u64,
    seed: u64,
    h0: NullLaw,
    out: Option<&Path>,
    csv: Option<&Path>,
) -> Result<u8> {
    if trials == 0 {
        return Err(config_error("--trials must be >= 1"));
    }
    let bundle = read_bundle(path)?;
    let cfg = SimConfig {
        trials,
        seed: RngSeed::new(seed, 0),
        h0_source: match h0 {
            NullLaw::Native => H0Source::Native,
            NullLaw::WorstCase => H0Source::WorstCase,
        },
    };
    let report = simulate_bundle(&bundle, &cfg)?;
    write_json("simulate", &report, out)?;
    if let Some(path) = csv {
        let rows: Vec<SweepRow> = sweep_rows(&bundle, Some(&report))
            .into_iter()
            .map(|r| SweepRow { seed, ..r })
            .collect();
        write_csv(&rows, &SWEEP_COLUMNS, Some(path))?;
    }
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
pub fn asymptotic(
    source: &SourceArgs,
    lengths: &[usize],
    m: u64,
    alpha: f64,
    trials: u64,
    seed: u64,
    eta: Option<f64>,
    out: Option<&Path>,
) -> Result<u8> {
    if trials == 0 {
        return Err(config_error("--trials must be >= 1"));
    }
    let (p, _) = symbol_pmf(source)?;
    let cfg = SimConfig::new(trials, seed);
    let mut rows = Vec::new();
    let mut maxima = Vec::new();
    let mut fa_ok = true;
    for &t in lengths {
        let eta = eta.unwrap_or_else(|| default_eta(t));
        let scheme = AsymptoticScheme::with_eta(&p, t, m, alpha, eta, limit()?)?;
        // same seed at every length
        let sim = simulate_asymptotic(&scheme, &cfg)?;
        let exact: Vec<f64> = (1..=m).map(|j| scheme.exact_error(j)).collect();
        let rate = scheme.rate_condition();
        let fa = sim.false_alarm.map(|e| e.estimate);
        fa_ok &= fa.is_some_and(|f| f <= alpha + 0.02);
        maxima.push(sim.max_beta_hat);
        rows.push(json!({
            "T": t, "eta": eta, "n_prime": scheme.n_prime(),
            "typical_mass": scheme.index().typical_mass(),
            "beta_exact": exact, "max_beta_exact": exact.iter().copied().fold(0.0, f64::max),
            "beta_hat": sim.beta_hat, "max_beta_hat": sim.max_beta_hat,
            "false_alarm": sim.false_alarm, "false_alarm_bound": sim.false_alarm_bound,
            "false_alarm_worst_case": sim.false_alarm_worst_case,
            "rate_condition": {
                "lhs_bits": bits(rate.lhs), "entropy_bits": bits(rate.entropy), "holds": rate.holds,
            },
        }));
    }
    let decreasing = maxima.windows(2).all(|w| w[1] < w[0]);
    let report = json!({
        "pmf": p, "m": m, "alpha": alpha, "trials": trials, "seed": seed, "rows": rows,
        "max_beta_hat_strictly_decreasing": decreasing,
        "false_alarm_within_alpha_plus_0_02": fa_ok,
    });
    write_json("asymptotic", report, out)?;
    Ok(0)
}

fn parse_joints(joints: Option<&str>, file: Option<&Path>) -> Result<Vec<Pmf64>> {
    let rows: Vec<Vec<f64>> = match (joints, file) {
        (Some(s), _) => s
            .split(';')
            .map(|row| {
                row.split(',')
                    .map(|x| {
                        x.trim()
                            .parse::<f64>()
                            .map_err(|_| config_error(format!("bad probability `{x}` in --joints")))
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?,
        (None, Some(path)) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))?
        }
        (None, None) => return Err(config_error("one of --joints or --joints-file is required")),
    };
    rows.iter().map(|r| Pmf64::from_f64s(r).map_err(Into::into)).collect()
}

pub fn exponent(cmd: ExponentCmd) -> Result<u8> {
    match cmd {
        ExponentCmd::Fit {
            joints,
            joints_file,
            j,
            t,
            level,
            trials,
            seed,
            out,
        } => {
            if trials == 0 {
                return Err(config_error("--trials must be >= 1"));
            }
            let joints = parse_joints(joints.as_deref(), joints_file.as_deref())?;
            let fit = empirical_exponent(&joints, j, &t, level, &SimConfig::new(trials, seed), limit()?)?;
            let mut report = serde_json::to_value(&fit)?;
            report["bound"] = num(fit.bound);
            report["bound_bits"] = num(bits(fit.bound));
            report["slope_bits"] = num(bits(fit.fit.slope));
            report["seed"] = json!(seed);
            report["trials"] = json!(trials);
            write_json("exponent-fit", report, out.as_deref())?;
        }
        ExponentCmd::Bound {
            source,
            t,
            m,
            alpha,
            d,
            metric,
            out,
        } => {
            let mut rows = Vec::new();
            let mut best: Vec<f64> = vec![f64::NEG_INFINITY; m as usize];
            for &dv in &d {
                let bundle = build_bundle(&SchemeArgs {
                    source: source.clone(),
                    t,
                    m,
                    alpha,
                    d: dv,
                    metric,
                    family: DecoderFamily::Cyclic,
                    seed: 0,
                })?;
                let bounds = bundle_exponent_bounds(&bundle)?;
                for (b, &x) in best.iter_mut().zip(&bounds) {
                    *b = b.max(x);
                }
                rows.push(json!({
                    "d": dv, "beta_star": bundle.beta_star,
                    "bounds": bounds.iter().map(|&x| num(x)).collect::<Vec<_>>(),
                }));
            }
            let report = json!({
                "T": t, "m": m, "alpha": alpha, "metric": metric.as_str(), "rows": rows,
                "max_over_grid": best.iter().map(|&x| num(x)).collect::<Vec<_>>(),
            });
            write_json("exponent-bound", report, out.as_deref())?;
        }
    }
    Ok(0)
}

fn read_tokens(tokens: Option<Vec<usize>>, file: Option<&Path>) -> Result<Vec<usize>> {
    match (tokens, file) {
        (Some(t), _) => Ok(t),
        (None, Some(path)) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let value: Value =
                serde_json::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
            let array = value.get("tokens").cloned().unwrap_or(value);
            serde_json::from_value(array).map_err(|e| config_error(format!("{}: {e}", path.display())))
        }
        (None, None) => Err(config_error("one of --tokens or --tokens-file is required")),
    }
}

pub fn baseline(cmd: BaselineCmd) -> Result<u8> {
    match cmd {
        BaselineCmd::Generate {
            source,
            t,
            rho,
            delta,
            key,
            seed,
            out,
        } => {
            let (q, v) = symbol_pmf(&source)?;
            let params = GreenRedParams::new(v, rho, delta, key)?;
            let tokens = generate(&q, t, &params, &mut RngSeed::new(seed, 0).stream())?;
            let report = json!({
                "V": v, "T": t, "rho": rho, "delta": delta, "key": key, "seed": seed,
                "initial_context": INITIAL_CONTEXT, "tokens": tokens,
            });
            write_json("baseline-generate", report, out.as_deref())?;
        }
        BaselineCmd::Detect {
            tokens,
            tokens_file,
            v,
            rho,
            key,
            alpha,
            out,
        } => {
            let tokens = read_tokens(tokens, tokens_file.as_deref())?;
            let params = GreenRedParams::new(v, rho, 0.0, key)?;
            let det = detect_z(&tokens, &params, alpha)?;
            write_json("baseline-detect", det, out.as_deref())?;
        }
        BaselineCmd::Distortion {
            source,
            rho,
            delta,
            seed,
            out,
        } => {
            let (q, v) = symbol_pmf(&source)?;
            let mut rows = Vec::new();
            let mut values = Vec::new();
            for &dl in &delta {
                let params = GreenRedParams::new(v, rho, dl, 0)?;
                let x = distortion_of(&q, &params, seed)?;
                values.push(x);
                rows.push(json!({ "delta": dl, "distortion_nats": x, "distortion_bits": bits(x) }));
            }
            let report = json!({
                "V": v, "rho": rho, "seed": seed, "rows": rows,
                "strictly_increasing": values.windows(2).all(|w| w[1] > w[0]),
            });
            write_json("baseline-distortion", report, out.as_deref())?;
        }
        BaselineCmd::Power {
            source,
            t,
            rho,
            delta,
            alpha,
            trials,
            seed,
            out,
        } => {
            let (q, v) = symbol_pmf(&source)?;
            let mut rows = Vec::new();
            for &dl in &delta {
                let params = GreenRedParams::new(v, rho, dl, 0)?;
                let rate = detection_rate(&q, t, &params, alpha, trials, seed)?;
                rows.push(json!({ "delta": dl, "detection": rate }));
            }
            let report = json!({
                "V": v, "T": t, "rho": rho, "alpha": alpha, "trials": trials, "seed": seed, "rows": rows,
            });
            write_json("baseline-power", report, out.as_deref())?;
        }
    }
    Ok(0)
}

pub struct SweepAxes {
    pub t: Vec<usize>,
    pub m: Vec<u64>,
    pub alpha: Vec<f64>,
    pub d: Vec<f64>,
    pub metric: Vec<DistortionMetric>,
}

pub fn sweep(
    source: &SourceArgs,
    axes: &SweepAxes,
    family: DecoderFamily,
    trials: u64,
    seed: u64,
    out: Option<&Path>,
) -> Result<u8> {
    if axes.m.is_empty() || axes.alpha.is_empty() {
        return Err(config_error("sweep needs --m and --alpha"));
    }
    let mut rows = Vec::new();
    for &t in &axes.t {
        for &m in &axes.m {
            for &alpha in &axes.alpha {
                for &d in &axes.d {
                    for &metric in &axes.metric {
                        let bundle = build_bundle(&SchemeArgs {
                            source: source.clone(),
                            t,
                            m,
                            alpha,
                            d,
                            metric,
                            family,
                            seed,
                        })?;
                        let sim = if trials > 0 {
                            Some(simulate_bundle(&bundle, &SimConfig::new(trials, seed))?)
                        } else {
                            None
                        };
                        rows.extend(sweep_rows(&bundle, sim.as_ref()));
                    }
                }
            }
        }
    }
    write_csv(&rows, &SWEEP_COLUMNS, out)?;
    Ok(0)
}

fn parse_step(s: &str) -> Result<f64> {
    let bad = || config_error(format!("--grid-step must be `1/K` or a decimal, got `{s}`"));
    match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| bad())?;
            let b: f64 = b.trim().parse().map_err(|_| bad())?;
            Ok(a / b)
        }
        None => s.trim().parse().map_err(|_| bad()),
    }
}

pub fn oracle(source: &SourceArgs, alpha: f64, m: u64, grid_step: &str, out: Option<&Path>) -> Result<u8> {
    let (p, _) = symbol_pmf(source)?;
    let step = parse_step(grid_step)?;
    let report = brute_force_minmax(&p, alpha, m, step)?;
    write_json("oracle", report, out)?;
    Ok(0)
}

//! Invariants checked over random inputs.

use dembed_core::greenred::{green_mask, tilt, GreenRedParams};
use dembed_core::harness::{brute_force_minmax, exact_errors, validate};
use dembed_core::optimize::{
    beta_star_of, maximize_entropy, minimize_overhang, tv_overhang_closed_form, DistortionMetric,
};
use dembed_core::prob::{
    entropy, iid_extension, kl_divergence, overhang, tv_distance, MaterializeLimit, SequenceSpace,
};
use dembed_core::scheme::{
    build_finite_scheme, default_eta, DecoderFamily, DecoderSpec, SchemeParams, TypicalIndex, ALIGNED_MESSAGE,
};
use dembed_core::{Pmf64, SchemeBundle64};
use proptest::prelude::*;

fn pmf(len: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Pmf64> {
    prop::collection::vec(0.01f64..1.0, len).prop_map(|w| {
        let s: f64 = w.iter().sum();
        Pmf64::from_f64s(&w.iter().map(|x| x / s).collect::<Vec<_>>()).unwrap()
    })
}

fn pmf_pair(len: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = (Pmf64, Pmf64)> {
    len.prop_flat_map(|n| (pmf(n..=n), pmf(n..=n)))
}

/// Small finite bundle with parameters kept inside their valid ranges.
fn small_bundle() -> impl Strategy<Value = SchemeBundle64> {
    (2usize..=4, 1usize..=2)
        .prop_flat_map(|(v, t)| {
            let n = (v as u64).pow(t as u32);
            (
                pmf(v..=v),
                Just((v, t)),
                1..=n.min(6),
                0.05f64..0.95,
                0.0f64..0.3,
                any::<bool>(),
                any::<bool>(),
            )
        })
        .prop_map(|(q, (v, t), m, alpha, d, kl, modular)| {
            let params = SchemeParams {
                alphabet_size: v,
                length: t,
                m,
                alpha,
                d,
                metric: if kl {
                    DistortionMetric::KlForward
                } else {
                    DistortionMetric::Tv
                },
                family: if modular {
                    DecoderFamily::ModularField
                } else {
                    DecoderFamily::Cyclic
                },
                seed: 0,
            };
            build_finite_scheme(&params, &q, MaterializeLimit::default()).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn entropy_lies_between_zero_and_log_n(p in pmf(1..=12)) {
        let h = entropy(&p);
        prop_assert!(h >= -1e-12);
        prop_assert!(h <= (p.len() as f64).ln() + 1e-12);
    }

    #[test]
    fn kl_is_nonnegative_and_zero_on_the_diagonal((p, q) in pmf_pair(2..=8)) {
        prop_assert!(kl_divergence(&p, &q).unwrap() >= -1e-12);
        prop_assert!(kl_divergence(&p, &p).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn tv_is_a_metric(n in 2usize..=8, seeds in prop::collection::vec(0.01f64..1.0, 24)) {
        let mk = |k: usize| {
            let w = &seeds[k * 8..k * 8 + n];
            let s: f64 = w.iter().sum();
            Pmf64::from_f64s(&w.iter().map(|x| x / s).collect::<Vec<_>>()).unwrap()
        };
        let (a, b, c) = (mk(0), mk(1), mk(2));
        let ab = tv_distance(&a, &b).unwrap();
        prop_assert!((ab - tv_distance(&b, &a).unwrap()).abs() <= 1e-15);
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!(tv_distance(&a, &c).unwrap() <= ab + tv_distance(&b, &c).unwrap() + 1e-12);
    }

    #[test]
    fn overhang_matches_the_clipped_complement(p in pmf(1..=10), tau in 0.0f64..1.0) {
        let clipped: f64 = p.iter().map(|x| x.min(tau)).sum();
        prop_assert!((overhang(&p, tau) - (1.0 - clipped)).abs() <= 1e-12);
        let direct: f64 = p.iter().map(|x| (x - tau).max(0.0)).sum();
        prop_assert!((overhang(&p, tau) - direct).abs() <= 1e-12);
    }

    #[test]
    fn iid_extension_multiplies_entropy(p in pmf(2..=4), t in 1usize..=4) {
        let ext = iid_extension(&p, SequenceSpace::new(p.len(), t).unwrap(), MaterializeLimit::default()).unwrap();
        prop_assert!((entropy(&ext) - t as f64 * entropy(&p)).abs() <= 1e-9);
    }

    #[test]
    fn min_max_error_is_monotone_in_alpha(p in pmf(2..=10), a in 0.01f64..0.99, b in 0.01f64..0.99, m in 1u64..=4) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(beta_star_of(&p, hi, m).unwrap() <= beta_star_of(&p, lo, m).unwrap() + 1e-12);
    }

    #[test]
    fn overhang_minimizer_respects_its_budget(q in pmf(2..=6), alpha in 0.05f64..0.95, m in 1u64..=4, d in 0.0f64..0.5, kl in any::<bool>()) {
        let metric = if kl { DistortionMetric::KlForward } else { DistortionMetric::Tv };
        let rep = minimize_overhang(&q, alpha, m, d, metric).unwrap();
        prop_assert!(metric.evaluate(&rep.argmin_or_argmax, &q).unwrap() <= d + 1e-9);
        // never worse than staying at q
        prop_assert!(rep.objective_value <= overhang(&q, alpha / m as f64) + 1e-9);
        if !kl {
            let closed = tv_overhang_closed_form(&q, alpha / m as f64, d);
            prop_assert!((rep.objective_value - closed).abs() <= 1e-12);
        }
    }

    #[test]
    fn entropy_maximizer_is_feasible_and_monotone(q in pmf(2..=6), d1 in 0.0f64..0.5, d2 in 0.0f64..0.5, kl in any::<bool>()) {
        let metric = if kl { DistortionMetric::KlForward } else { DistortionMetric::Tv };
        let (lo, hi) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
        let a = maximize_entropy(&q, lo, metric).unwrap();
        let b = maximize_entropy(&q, hi, metric).unwrap();
        prop_assert!(metric.evaluate(&a.argmin_or_argmax, &q).unwrap() <= lo + 1e-9);
        prop_assert!(a.objective_value <= b.objective_value + 1e-9);
        prop_assert!(a.objective_value >= entropy(&q) - 1e-9);
        if kl {
            // Pinsker: the maximizer stays within sqrt(d/2) in TV
            prop_assert!(tv_distance(&a.argmin_or_argmax, &q).unwrap() <= (lo / 2.0).sqrt() + 1e-9);
        }
    }

    #[test]
    fn decoders_are_latin_squares(n in 1u64..=12, m_frac in 0.0f64..1.0, modular in any::<bool>()) {
        let m = 1 + ((n - 1) as f64 * m_frac) as u64;
        let family = if modular { DecoderFamily::ModularField } else { DecoderFamily::Cyclic };
        let spec = DecoderSpec::new(family, n, m).unwrap();
        for j in 1..=m {
            let mut cols = vec![0u32; n as usize];
            for x in 0..n {
                let hits: Vec<u64> = (0..n).filter(|&z| spec.decode(x, z).unwrap() == j).collect();
                prop_assert_eq!(hits.len(), 1);
                cols[hits[0] as usize] += 1;
            }
            prop_assert!(cols.iter().all(|&c| c == 1));
        }
        // the redundant value never decodes to a message
        for x in 0..n {
            prop_assert_eq!(spec.decode(x, n).unwrap(), 0);
        }
    }

    #[test]
    fn couplings_hold_their_marginals(b in small_bundle()) {
        for c in &b.couplings {
            prop_assert!(c.max_marginal_deviation() <= 1e-10);
            prop_assert!((c.total() - 1.0).abs() <= 1e-10);
            prop_assert!(c.cells().iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn residual_mass_equals_exact_error(b in small_bundle()) {
        let exact = exact_errors(&b);
        for (c, e) in b.couplings.iter().zip(&exact) {
            prop_assert!((c.residual_mass - e).abs() <= 1e-10);
        }
        let aligned = &b.couplings[(ALIGNED_MESSAGE - 1) as usize];
        prop_assert!((aligned.residual_mass - b.beta_star).abs() <= 1e-10);
    }

    #[test]
    fn constructions_control_false_alarm_and_obey_the_converse(b in small_bundle()) {
        let r = validate(&b);
        prop_assert!(r.false_alarm_worst_case <= b.params.alpha + 1e-12);
        prop_assert!(r.max_beta >= r.beta_star - 1e-10);
        prop_assert!(r.marginals_ok);
    }

    #[test]
    fn oracle_never_beats_the_formula_by_more_than_the_grid(p in pmf(2..=3), alpha in 0.1f64..0.95, m in 1u64..=2) {
        prop_assume!(m as usize <= p.len());
        let step = 1.0 / 10.0;
        let o = brute_force_minmax(&p, alpha, m, step).unwrap();
        prop_assert!(o.value >= o.beta_star - (p.len() as f64 + 1.0) * step);
    }

    #[test]
    fn typical_rank_round_trips(p in pmf(2..=3), t in 2usize..=9, pick in any::<u64>()) {
        let idx = TypicalIndex::new(&p, t, default_eta(t), MaterializeLimit::default()).unwrap();
        prop_assume!(idx.total_size() > 0);
        let r = pick % idx.total_size();
        let seq = idx.unrank(r).unwrap();
        prop_assert!(idx.is_typical(&seq));
        prop_assert_eq!(idx.rank(&seq), Some(r));
    }

    #[test]
    fn tilt_keeps_support_and_normalization(q in pmf(2..=12), g in 1usize..12, delta in 0.0f64..6.0, prev in 0usize..12, key in any::<u64>()) {
        let v = q.len();
        let rho = (1 + g % (v - 1)) as f64 / v as f64;
        let params = GreenRedParams::new(v, rho, delta, key).unwrap();
        let mask = green_mask(prev % q.len(), &params).unwrap();
        let t = tilt(&q, &mask, delta).unwrap();
        prop_assert!((t.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        for (a, b) in t.iter().zip(q.iter()) {
            prop_assert_eq!(a > 0.0, b > 0.0);
        }
        // tilting toward green never lowers the green mass
        let green: f64 = t.iter().zip(&mask).filter(|(_, &g)| g).map(|(x, _)| x).sum();
        let q_green: f64 = q.iter().zip(&mask).filter(|(_, &g)| g).map(|(x, _)| x).sum();
        prop_assert!(green >= q_green - 1e-12);
    }
}

#[test]
fn green_count_is_exact_for_every_context() {
    let params = GreenRedParams::new(10, 0.5, 1.0, 42).unwrap();
    for prev in 0..10 {
        let mask = green_mask(prev, &params).unwrap();
        assert_eq!(mask.iter().filter(|&&g| g).count(), params.green_count().unwrap());
    }
}

#[test]
fn manifest_round_trip_rebuilds_identical_couplings() {
    let q = Pmf64::from_f64s(&[0.5, 0.3, 0.2]).unwrap();
    let params = SchemeParams {
        alphabet_size: 3,
        length: 2,
        m: 3,
        alpha: 0.4,
        d: 0.05,
        metric: DistortionMetric::KlForward,
        family: DecoderFamily::Cyclic,
        seed: 0,
    };
    let b = build_finite_scheme(&params, &q, MaterializeLimit::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bundle.json");
    let mut f = std::fs::File::create(&path).unwrap();
    b.write_manifest(&mut f).unwrap();
    drop(f);
    let back = SchemeBundle64::read_manifest(std::fs::File::open(&path).unwrap(), MaterializeLimit::default()).unwrap();
    assert_eq!(back.beta_star, b.beta_star);
    for (x, y) in back.couplings.iter().zip(&b.couplings) {
        assert_eq!(x.cells(), y.cells());
    }
}

#[test]
fn green_membership_is_uniform_over_contexts() {
    // 10^4 contexts: every previous token under 1000 keys
    let (v, rho) = (10usize, 0.3f64);
    let mut hits = vec![0u32; v];
    for key in 0..1000u64 {
        let params = GreenRedParams::new(v, rho, 1.0, key.wrapping_mul(0x9e37_79b9_7f4a_7c15)).unwrap();
        for prev in 0..v {
            for (h, g) in hits.iter_mut().zip(green_mask(prev, &params).unwrap()) {
                *h += g as u32;
            }
        }
    }
    let band = 3.0 * (rho * (1.0 - rho) / 1e4).sqrt();
    for h in hits {
        let freq = h as f64 / 1e4;
        assert!((freq - rho).abs() <= band, "frequency {freq} outside {rho} ± {band}");
    }
}

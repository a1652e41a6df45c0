//! Property tests for the measure, kernel and blowup invariants.

use hg_core::blowup::{classify_point, Verdict};
use hg_core::kernel::{evaluate, evaluate_full_quadrature, sandwich_bounds};
use hg_core::measures::{dilate, meps_norm, translate, Atom, Measure, Modifier};
use hg_core::{HgError, QuadratureConfig};
use proptest::prelude::*;

fn cfg() -> QuadratureConfig {
    QuadratureConfig::default()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Nonnegative closed-form families with growth rate `a`.
fn family(dim: usize) -> impl Strategy<Value = Measure> {
    let n = dim as f64;
    prop_oneof![
        (0.0..0.2f64).prop_map(move |a| Measure::exp_quad(dim, a, vec![0.0; dim], Modifier::One).unwrap()),
        (0.0..0.2f64, 0.2..2.0f64)
            .prop_map(move |(a, g)| Measure::exp_quad(dim, a, vec![0.0; dim], Modifier::ExpDecay { gamma: g }).unwrap()),
        (0.0..0.2f64, 0.5..3.0f64)
            .prop_map(move |(a, al)| Measure::exp_quad(dim, a, vec![0.0; dim], Modifier::PowerDecay { alpha: n + al }).unwrap()),
        proptest::collection::vec((proptest::collection::vec(-3.0..3.0f64, dim), 0.1..2.0f64), 1..5).prop_map(move |atoms| {
            let atoms = atoms.into_iter().map(|(location, weight)| Atom { location, weight }).collect();
            Measure::dirac_comb(dim, atoms).unwrap()
        }),
    ]
}

fn dim_and_family() -> impl Strategy<Value = (usize, Measure)> {
    (1usize..=2).prop_flat_map(|d| (Just(d), family(d)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn norms_increase_with_the_explicit_constant((dim, mu) in dim_and_family(), e1 in 0.25..1.0f64, f in 1.0..4.0f64) {
        let e2 = e1 * f;
        let n1 = meps_norm(&mu, e1, &cfg()).unwrap();
        let n2 = meps_norm(&mu, e2, &cfg()).unwrap();
        prop_assert!(n2 <= f.powf(dim as f64 / 2.0) * n1 * (1.0 + 1e-9), "{n2} vs {n1}");
    }

    #[test]
    fn translation_keeps_the_growth_index((dim, mu) in dim_and_family(), y in proptest::collection::vec(-5.0..5.0f64, 2)) {
        let moved = translate(&mu, &y[..dim]).unwrap();
        prop_assert_eq!(moved.growth_index().eps0, mu.growth_index().eps0);
    }

    #[test]
    fn dilation_rescales_the_norm_index((_, mu) in dim_and_family(), eps in 1.0..3.0f64, li in 0usize..3) {
        let lambda = [0.5, 1.0, 2.0][li];
        let c = cfg();
        let lhs = meps_norm(&dilate(&mu, lambda).unwrap(), eps, &c).unwrap();
        let rhs = meps_norm(&mu, eps / (lambda * lambda), &c).unwrap();
        prop_assert!(rel(lhs, rhs) <= 10.0 * c.rel_tol, "{lhs} vs {rhs}");
    }

    #[test]
    fn norm_of_a_sum_obeys_the_triangle_inequality(
        (dim, p) in dim_and_family(),
        q in family(1),
        c1 in -2.0..2.0f64,
        c2 in 0.1..2.0f64,
        eps in 0.5..2.0f64,
    ) {
        prop_assume!(dim == 1 && c1.abs() > 0.05);
        let c = cfg();
        let s = Measure::sum(1, vec![(c1, p.clone()), (c2, q.clone())]).unwrap();
        let bound = c1.abs() * meps_norm(&p, eps, &c).unwrap() + c2 * meps_norm(&q, eps, &c).unwrap();
        let got = meps_norm(&s, eps, &c).unwrap();
        prop_assert!(got <= bound * (1.0 + 10.0 * c.rel_tol), "{got} > {bound}");
        if c1 > 0.0 {
            prop_assert!(rel(got, bound) <= 10.0 * c.rel_tol, "{got} != {bound}");
        }
    }

    #[test]
    fn closed_form_matches_full_quadrature(a in 0.0..0.2f64, g in 0.2..2.0f64, x in -2.0..2.0f64, s in 0.05..0.9f64) {
        // s is the fraction of the 4At < 0.9 window.
        let mu = Measure::exp_quad(1, a, vec![0.0], Modifier::ExpDecay { gamma: g }).unwrap();
        let t = if a == 0.0 { s } else { s * 0.9 / (4.0 * a) };
        let c = cfg();
        let fast = evaluate(&mu, &[x], t, &c).unwrap().value;
        let slow = evaluate_full_quadrature(&mu, &[x], t, &c).unwrap().value;
        prop_assert!(rel(fast, slow) <= 10.0 * c.rel_tol, "{fast} vs {slow}");
    }

    #[test]
    fn solutions_of_nonnegative_data_are_positive((dim, mu) in dim_and_family(), x in proptest::collection::vec(-6.0..6.0f64, 2), t in 0.05..1.0f64) {
        prop_assert!(evaluate(&mu, &x[..dim], t, &cfg()).unwrap().value > 0.0);
    }

    #[test]
    fn evaluation_is_linear(p in family(1), q in family(1), c1 in -2.0..2.0f64, c2 in -2.0..2.0f64, x in -2.0..2.0f64, t in 0.05..1.0f64) {
        let c = cfg();
        let s = Measure::sum(1, vec![(c1, p.clone()), (c2, q.clone())]).unwrap();
        let parts = [(c1, &p), (c2, &q)].map(|(w, m)| w * evaluate(m, &[x], t, &c).unwrap().value);
        let got = evaluate(&s, &[x], t, &c).unwrap().value;
        let scale = parts[0].abs() + parts[1].abs();
        prop_assert!((got - parts[0] - parts[1]).abs() <= 10.0 * c.rel_tol * scale, "{got} vs {parts:?}");
    }

    #[test]
    fn evaluation_commutes_with_translation(
        (dim, mu) in dim_and_family(),
        x in proptest::collection::vec(-2.0..2.0f64, 2),
        y in proptest::collection::vec(-2.0..2.0f64, 2),
        t in 0.05..1.0f64,
    ) {
        let c = cfg();
        let moved = translate(&mu, &y[..dim]).unwrap();
        let shifted: Vec<f64> = x[..dim].iter().zip(&y).map(|(a, b)| a - b).collect();
        let lhs = evaluate(&moved, &x[..dim], t, &c).unwrap().value;
        let rhs = evaluate(&mu, &shifted, t, &c).unwrap().value;
        prop_assert!(rel(lhs, rhs) <= 10.0 * c.rel_tol, "{lhs} vs {rhs}");
    }

    #[test]
    fn sandwich_brackets_the_solution(mu in family(1), x in -2.0..2.0f64, t in 0.05..0.5f64, a in 1.1..1.9f64, b in 0.1..0.9f64) {
        let c = cfg();
        let u = evaluate(&mu, &[x], t, &c).unwrap().value;
        let (lo, hi) = sandwich_bounds(&mu, &[x], t, a, b, &c).unwrap();
        prop_assert!(lo <= u * (1.0 + 10.0 * c.rel_tol) && u <= hi * (1.0 + 10.0 * c.rel_tol), "{lo} <= {u} <= {hi}");
    }

    #[test]
    fn fast_decay_propagates(g in 0.1..2.0f64, w in 0.0..1.0f64, x in -3.0..3.0f64, t in 0.01..2.0f64) {
        // |φ| ≤ e^{-γ|x|²} with a sign change.
        let phi = Measure::sum(
            1,
            vec![
                (1.0, Measure::exp_quad(1, -g, vec![0.0], Modifier::One).unwrap()),
                (-w, Measure::exp_quad(1, -2.0 * g, vec![0.0], Modifier::One).unwrap()),
            ],
        )
        .unwrap();
        let c = cfg();
        let u = evaluate(&phi, &[x], t, &c).unwrap().value;
        let s = 1.0 + 4.0 * g * t;
        let bound = s.powf(-0.5) * (-g * x * x / s).exp();
        prop_assert!(u.abs() <= bound * (1.0 + 10.0 * c.rel_tol), "{u} > {bound}");
    }

    #[test]
    fn classification_commutes_with_translation(g in 0.5..2.0f64, x in -4.0..4.0f64, z in -3.0..3.0f64) {
        // Ball radius 2γ; stay off its boundary.
        prop_assume!((x.abs() - 2.0 * g).abs() > 0.1);
        let mu = Measure::exp_quad(1, 0.25, vec![0.0], Modifier::ExpDecay { gamma: g }).unwrap();
        let c = cfg();
        let here = classify_point(&mu, &[x], &c).unwrap();
        let there = classify_point(&translate(&mu, &[z]).unwrap(), &[x + z], &c).unwrap();
        prop_assert_eq!(here.is_regular(), there.is_regular());
        prop_assert_eq!(here.is_blowup(), there.is_blowup());
        if let (Verdict::Regular { limit: l1, .. }, Verdict::Regular { limit: l2, .. }) = (&here.verdict, &there.verdict) {
            prop_assert!(rel(*l1, *l2) <= 1e-6, "{l1} vs {l2}");
        }
    }

    #[test]
    fn regular_set_is_convex_along_segments(
        g in 0.5..2.0f64,
        p in proptest::collection::vec(-5.0..5.0f64, 2),
        q in proptest::collection::vec(-5.0..5.0f64, 2),
    ) {
        let mu = Measure::exp_quad(2, 0.25, vec![0.0, 0.0], Modifier::ExpDecay { gamma: g }).unwrap();
        let c = cfg();
        let mid = vec![(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0];
        if classify_point(&mu, &p, &c).unwrap().is_regular() && classify_point(&mu, &q, &c).unwrap().is_regular() {
            prop_assert!(classify_point(&mu, &mid, &c).unwrap().is_regular());
        }
    }

    #[test]
    fn verdicts_match_the_solution_near_blowup(g in 0.5..2.0f64, x in -3.0..3.0f64) {
        // A = 1/4, so T = 1.
        prop_assume!((x.abs() - 2.0 * g).abs() > 0.5);
        let mu = Measure::exp_quad(1, 0.25, vec![0.0], Modifier::ExpDecay { gamma: g }).unwrap();
        let c = cfg();
        let verdict = classify_point(&mu, &[x], &c).unwrap().verdict;
        // Values past f64 range are reported as overflow, which counts as
        // exceeding any bound.
        let track: Vec<f64> = (2..=7)
            .map(|k| match evaluate(&mu, &[x], 1.0 - 10f64.powi(-k), &c) {
                Ok(v) => v.value,
                Err(HgError::QuadratureFailure(m)) if m.contains("overflow") => f64::INFINITY,
                Err(e) => panic!("{e}"),
            })
            .collect();
        match verdict {
            Verdict::Regular { limit, .. } => {
                // The track need not be monotone (it decreases at x = 0 here),
                // but its steps shrink toward the reported limit.
                let steps: Vec<f64> = track.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
                prop_assert!(steps.windows(2).all(|s| s[1] <= s[0] + 1e-12 * limit), "{track:?}");
                prop_assert!(rel(*track.last().unwrap(), limit) <= 1e-4, "{track:?} vs {limit}");
            }
            Verdict::Blowup => prop_assert!(track.iter().any(|v| *v > 1e6), "{track:?}"),
            other => prop_assert!(false, "unexpected verdict {other:?}"),
        }
    }
}

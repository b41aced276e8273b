mod common;

use proptest::prelude::*;

use volgrow_core::bowen::{
    in_dynamical_ball, separated_entropy, spanning_entropy, DynamicalBallQuery,
};
use volgrow_core::cli::{parse_config, ExperimentConfig};
use volgrow_core::cocycle::{accumulate, accumulate_with_refresh};
use volgrow_core::linalg::Mat;
use volgrow_core::volume::{
    fixed_dim_log_det_max, growth_rate, integrate_growth, integrate_growth_with_error,
    log_mean_exp, max_subspace_log_det, SamplerSpec,
};
use volgrow_core::{torus_distance, SystemSpec, TorusPoint};

fn system_by_index(i: usize) -> SystemSpec {
    match i % 5 {
        0 => SystemSpec::cat_map(),
        1 => SystemSpec::skew_product(0.1).unwrap(),
        2 => SystemSpec::perturbed_cat(0.05).unwrap(),
        3 => SystemSpec::linear(vec![vec![1, 1, 0], vec![1, 2, 1], vec![0, 1, 2]]).unwrap(),
        _ => SystemSpec::skew_product(0.0).unwrap(),
    }
}

fn point_in(d: usize) -> impl Strategy<Value = TorusPoint> {
    prop::collection::vec(0.0..1.0f64, d).prop_map(|c| TorusPoint::new(&c).unwrap())
}

fn system_and_point() -> impl Strategy<Value = (SystemSpec, TorusPoint)> {
    (0usize..5).prop_flat_map(|i| {
        let s = system_by_index(i);
        let d = s.dimension();
        (Just(s), point_in(d))
    })
}

fn descending(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0..50.0f64, 1..=max_len).prop_map(|mut v| {
        v.sort_by(|a, b| b.partial_cmp(a).unwrap());
        v
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn max_subspace_is_best_partial_sum(v in descending(4)) {
        let mut best = 0.0f64;
        let mut acc = 0.0;
        for x in &v {
            acc += x;
            best = best.max(acc);
        }
        prop_assert_eq!(max_subspace_log_det(&v).unwrap(), best);
        for k in 0..=v.len() {
            prop_assert_eq!(fixed_dim_log_det_max(&v, k).unwrap(), v[..k].iter().sum::<f64>());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cocycle_matches_compound_oracle((sys, x) in system_and_point(), n in 1usize..=20) {
        let got = accumulate(&sys, &x, n).unwrap().log_singular;
        let want = common::compound_log_singular(&common::orbit_jacobians(&sys, &x, n));
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((g - w).abs() < 1e-8, "{:?} vs {:?}", got, want);
        }
    }

    #[test]
    fn refresh_cadence_does_not_matter((sys, x) in system_and_point(), n in 1usize..200) {
        let a = accumulate_with_refresh(&sys, &x, n, 1).unwrap().log_singular;
        let b = accumulate_with_refresh(&sys, &x, n, 5).unwrap().log_singular;
        for (p, q) in a.iter().zip(&b) {
            prop_assert!((p - q).abs() <= 1e-9 * n as f64, "{:?} vs {:?}", a, b);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences((sys, x) in system_and_point()) {
        let d = sys.dimension();
        let j = sys.jacobian(&x).unwrap().entries;
        let h = 1e-6;
        for c in 0..d {
            let mut e = vec![0.0; d];
            e[c] = h;
            let fp = sys.evaluate(&x.offset(&e)).unwrap();
            e[c] = -h;
            let fm = sys.evaluate(&x.offset(&e)).unwrap();
            for r in 0..d {
                let mut diff = fp.coords()[r] - fm.coords()[r];
                diff -= diff.round();
                prop_assert!((diff / (2.0 * h) - j[(r, c)]).abs() < 1e-6);
            }
        }
        prop_assert!(j.determinant().abs() > 1e-3);
    }

    #[test]
    fn inverse_round_trip((sys, x) in system_and_point()) {
        let y = sys.evaluate(&sys.evaluate_inverse(&x).unwrap()).unwrap();
        prop_assert!(torus_distance(&x, &y) <= 1e-12);
        let z = sys.evaluate_inverse(&sys.evaluate(&x).unwrap()).unwrap();
        prop_assert!(torus_distance(&x, &z) <= 1e-12);
    }

    #[test]
    fn coordinates_stay_in_unit_interval((sys, x) in system_and_point(), steps in 1usize..50) {
        let mut p = x;
        for _ in 0..steps {
            p = sys.evaluate(&p).unwrap();
            prop_assert!(p.coords().iter().all(|c| (0.0..1.0).contains(c)));
        }
    }

    #[test]
    fn torus_distance_is_a_metric(a in point_in(3), b in point_in(3), c in point_in(3)) {
        let (ab, ba, bc, ac) = (torus_distance(&a, &b), torus_distance(&b, &a), torus_distance(&b, &c), torus_distance(&a, &c));
        prop_assert_eq!(ab, ba);
        prop_assert!(ab <= 0.5);
        prop_assert_eq!(torus_distance(&a, &a), 0.0);
        prop_assert!(ac <= ab + bc + 1e-15);
    }

    #[test]
    fn ball_membership_is_monotone((sys, x) in system_and_point(), n in 2usize..15, delta in 0.01..0.3f64, seed in any::<u64>()) {
        let d = sys.dimension();
        let v: Vec<f64> = volgrow_core::rng::uniform_point(seed, volgrow_core::rng::Stream::Test, 0, d)
            .coords().iter().map(|c| 2.0 * delta * (c - 0.5)).collect();
        let y = x.offset(&v);
        let inside = |m: usize, dl: f64| in_dynamical_ball(&sys, &DynamicalBallQuery::new(x, m, dl).unwrap(), &y).unwrap();
        if inside(n, delta) {
            for m in 1..n {
                prop_assert!(inside(m, delta));
            }
            prop_assert!(inside(n, (delta * 1.5).min(0.49)));
        }
    }

    #[test]
    fn log_mean_exp_shift_invariance(v in prop::collection::vec(-700.0..700.0f64, 1..50), s in -1000.0..1000.0f64) {
        let (a, _) = log_mean_exp(&v);
        let shifted: Vec<f64> = v.iter().map(|x| x + s).collect();
        let (b, _) = log_mean_exp(&shifted);
        prop_assert!((b - a - s).abs() < 1e-9 * (1.0 + a.abs() + s.abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn linear_log_integral_is_subadditive(a in 1usize..40, b in 1usize..40, which in 0usize..2) {
        let sys = if which == 0 {
            SystemSpec::cat_map()
        } else {
            SystemSpec::linear(vec![vec![1, 1, 0], vec![1, 2, 1], vec![0, 1, 2]]).unwrap()
        };
        let s = SamplerSpec::monte_carlo(4, 0);
        let i = |n| integrate_growth(&sys, n, &s).unwrap();
        prop_assert!(i(a + b) <= i(a) + i(b) + 1e-9);
    }

    #[test]
    fn sandwich(n in 1usize..5, delta in 0.1..0.2f64, which in 0usize..3) {
        let sys = system_by_index(which);
        prop_assume!(sys.dimension() == 2);
        let res = 100;
        let span = spanning_entropy(&sys, n, delta, res).unwrap().cover_size;
        let sep = separated_entropy(&sys, n, delta, res).unwrap().cover_size;
        let sep2 = separated_entropy(&sys, n, 2.0 * delta, res).unwrap().cover_size;
        prop_assert!(sep2 <= span && span <= sep, "{} {} {}", sep2, span, sep);
    }

    #[test]
    fn config_round_trip(
        seed in any::<u64>(),
        delta in 0.001..0.499f64,
        ns in prop::collection::btree_set(1usize..500, 3..8),
        mc in 100usize..10_000,
        bundle in 0usize..2,
        px in 0.0..1.0f64,
        py in 0.0..1.0f64,
    ) {
        let n_list: Vec<String> = ns.iter().map(|n| n.to_string()).collect();
        let text = format!(
            "[system]\nkind = perturbed_cat\nepsilon = 0.03\n[run]\nseed = {seed}\ndelta = {delta}\nn_list = {}\nmc_count = {mc}\nball_bundle = {}\ncenter = {px}, {py}\n",
            n_list.join(","),
            if bundle == 0 { "max_over_v" } else { "fixed_f:0" },
        );
        let c: ExperimentConfig = parse_config(&text).unwrap();
        let again = parse_config(&c.to_config_text()).unwrap();
        prop_assert_eq!(&again, &c);
        prop_assert_eq!(again.to_config_text(), c.to_config_text());
    }
}

#[test]
fn doubling_samples_stays_within_three_standard_errors() {
    let sys = SystemSpec::perturbed_cat(0.05).unwrap();
    for n in [5, 20] {
        let a = integrate_growth_with_error(&sys, n, &SamplerSpec::monte_carlo(4000, 2)).unwrap();
        let b = integrate_growth_with_error(&sys, n, &SamplerSpec::monte_carlo(8000, 2)).unwrap();
        assert!(
            (a.log_integral - b.log_integral).abs() <= 3.0 * a.stderr,
            "{a:?} {b:?}"
        );
    }
}

#[test]
fn growth_curve_is_bitwise_deterministic() {
    let sys = SystemSpec::perturbed_cat(0.05).unwrap();
    let s = SamplerSpec::monte_carlo(500, 99);
    let a = growth_rate(&sys, &[3, 6, 9], &s).unwrap();
    let b = growth_rate(&sys, &[3, 6, 9], &s).unwrap();
    assert_eq!(format!("{a:?}"), format!("{b:?}"));
    let c = growth_rate(&sys, &[3, 6, 9], &SamplerSpec::monte_carlo(500, 100)).unwrap();
    assert_ne!(a.fitted_rate.to_bits(), c.fitted_rate.to_bits());
}

#[test]
fn identity_frame_is_exact() {
    let id = SystemSpec::identity(3).unwrap();
    let f = Mat::identity(3).columns(0, 2);
    let v =
        volgrow_core::cocycle::restricted_log_det(&id, &TorusPoint::origin(3), 100, &f).unwrap();
    assert_eq!(v, 0.0);
}

#[test]
fn ball_integral_upper_bound_on_built_ins() {
    use volgrow_core::bowen::{ball_volume_growth, default_delta, BundleChoice};
    use volgrow_core::rng::{uniform_point, Stream};
    let ns: Vec<usize> = (10..=30).collect();
    for sys in [
        SystemSpec::cat_map(),
        SystemSpec::skew_product(0.1).unwrap(),
        SystemSpec::perturbed_cat(0.05).unwrap(),
    ] {
        let d = sys.dimension();
        for i in 0..20 {
            let x = uniform_point(8, Stream::BallCenters, i, d);
            let r = ball_volume_growth(
                &sys,
                &x,
                &ns,
                default_delta(d),
                BundleChoice::FixedF(0),
                None,
                2000,
                i,
            )
            .unwrap();
            for v in &r.normalized_log_integrals {
                assert!(*v <= 0.05, "{:?} at {x:?}: {v}", sys.kind());
            }
        }
    }
    // few samples survive to n >= 10, so also check the exact linear-model
    // values for the cat map: ball area times λ^n on E^u
    let a = [[2.0, 1.0], [1.0, 1.0]];
    for n in 10..=30 {
        let exact = (common::linear_ball_area(a, n, 0.05).ln() + n as f64 * common::cat_entropy())
            / n as f64;
        assert!(exact <= 0.05, "n={n}: {exact}");
    }
}

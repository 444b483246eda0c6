use kappa4_core::gof::{ad_statistic, ks_statistic, mpae};
use kappa4_core::lmoments::sample_lmoments;
use kappa4_core::penalties::{enumerate_combos, log_joint_penalty};
use kappa4_core::{K4Params, OptimizerConfig, PenaltyCombo};
use proptest::prelude::*;

fn shape() -> impl Strategy<Value = (f64, f64)> {
    (-0.9f64..0.9, -1.2f64..1.2)
}

fn params() -> impl Strategy<Value = K4Params> {
    (-5.0f64..5.0, 0.1f64..5.0, shape()).prop_map(|(mu, s, (k, h))| K4Params::new(mu, s, k, h).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn cdf_inverts_quantile(p in params(), u in 1e-6f64..(1.0 - 1e-6)) {
        let d = p.dist();
        let x = d.quantile(u).unwrap();
        prop_assert!((d.cdf(x).unwrap() - u).abs() <= 1e-9, "{p:?} u={u}");
    }

    #[test]
    fn quantile_is_increasing(p in params(), a in 1e-6f64..0.999, gap in 1e-4f64..1e-3) {
        let d = p.dist();
        prop_assert!(d.quantile(a).unwrap() < d.quantile(a + gap).unwrap());
    }

    #[test]
    fn cdf_is_monotone_and_bounded(p in params(), x in -20.0f64..20.0, dx in 0.0f64..5.0) {
        let d = p.dist();
        let (f1, f2) = (d.cdf(x).unwrap(), d.cdf(x + dx).unwrap());
        prop_assert!((0.0..=1.0).contains(&f1) && (0.0..=1.0).contains(&f2));
        prop_assert!(f1 <= f2);
        prop_assert!(d.pdf(x).unwrap() >= 0.0);
    }

    #[test]
    fn samples_fall_in_support(p in params(), seed in any::<u64>()) {
        let d = p.dist();
        let s = d.support();
        for x in d.sample(50, seed).unwrap() {
            prop_assert!(s.lower_value() <= x && x <= s.upper_value(), "{x} outside {s:?}");
        }
    }

    #[test]
    fn joint_penalty_factorizes(k in -1.5f64..1.5, h in -1.5f64..1.5, idx in 0usize..18) {
        let c = enumerate_combos()[idx];
        let joint = log_joint_penalty(k, h, &c);
        let parts = c.k_pen.ln_value(k) + c.h_pen.ln_value(h);
        if parts.is_finite() {
            prop_assert!((joint - parts).abs() <= 1e-12);
        } else {
            prop_assert_eq!(joint, f64::NEG_INFINITY);
        }
    }

    #[test]
    fn sample_lmoments_are_affine_equivariant(
        data in prop::collection::vec(-100.0f64..100.0, 5..40),
        a in 0.1f64..10.0,
        c in -50.0f64..50.0,
    ) {
        prop_assume!(data.iter().any(|x| (x - data[0]).abs() > 1e-6));
        let l = sample_lmoments(&data).unwrap();
        let moved: Vec<f64> = data.iter().map(|x| a * x + c).collect();
        let m = sample_lmoments(&moved).unwrap();
        let tol = 1e-9 * (1.0 + l.lambda1.abs() * a + c.abs());
        prop_assert!((m.lambda1 - (a * l.lambda1 + c)).abs() <= tol);
        prop_assert!((m.lambda2 - a * l.lambda2).abs() <= 1e-9 * a * l.lambda2.max(1.0));
        prop_assert!((m.tau3 - l.tau3).abs() <= 1e-8);
        prop_assert!((m.tau4 - l.tau4).abs() <= 1e-8);
        prop_assert!(l.tau3.abs() < 1.0 && l.tau4 < 1.0);
    }

    #[test]
    fn ks_matches_brute_force(p in params(), seed in any::<u64>(), n in 1usize..60) {
        let d = p.dist();
        let data = d.sample(n, seed ^ 0x5eed).unwrap();
        let fast = ks_statistic(&data, &p).unwrap();
        // sup over x of |F_n(x) - F(x)|, checked just at and just before each point
        let mut brute = 0.0f64;
        for &x in &data {
            let f = d.cdf(x).unwrap();
            let at = data.iter().filter(|&&y| y <= x).count() as f64 / n as f64;
            let before = data.iter().filter(|&&y| y < x).count() as f64 / n as f64;
            brute = brute.max((at - f).abs()).max((f - before).abs());
        }
        prop_assert!((fast - brute).abs() <= 1e-15, "{fast} {brute}");
    }

    #[test]
    fn gof_statistics_are_finite(p in params(), seed in any::<u64>()) {
        let data = p.dist().sample(30, seed).unwrap();
        prop_assert!(mpae(&data, &p).unwrap() >= 0.0);
        prop_assert!(ad_statistic(&data, &p).unwrap().value.is_finite());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn penalized_fits_are_translation_equivariant(seed in any::<u64>(), c in -20.0f64..20.0) {
        let p = K4Params::new(0.0, 1.0, -0.1, 0.1).unwrap();
        let data = p.dist().sample(60, seed).unwrap();
        let moved: Vec<f64> = data.iter().map(|x| x + c).collect();
        let combo = PenaltyCombo::from_name("MPLE.MSo(k)MSo(h)").unwrap();
        let cfg = OptimizerConfig::default();
        let a = kappa4_core::likelihood::fit_mple(&data, &combo, &cfg).unwrap();
        let b = kappa4_core::likelihood::fit_mple(&moved, &combo, &cfg).unwrap();
        prop_assume!(a.converged && b.converged);
        prop_assert!((b.penalized_nll - a.penalized_nll).abs() <= 1e-6 * (1.0 + a.penalized_nll.abs()));
        let (pa, pb) = (a.params, b.params);
        prop_assert!((pb.mu() - pa.mu() - c).abs() <= 1e-4, "{pa:?} {pb:?}");
        prop_assert!((pb.sigma() - pa.sigma()).abs() <= 1e-4);
        prop_assert!((pb.k() - pa.k()).abs() <= 1e-4);
        prop_assert!((pb.h() - pa.h()).abs() <= 1e-4);
    }
}

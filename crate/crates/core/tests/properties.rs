use std::sync::{Arc, OnceLock};

use dnls_core::experiment::tube_distance;
use dnls_core::field::random_smooth;
use dnls_core::linop::apply_l;
use dnls_core::soliton::{
    classify_params, conserved, find_kappa0, normalized_momentum, profile_phi, Regime, Soliton,
};
use dnls_core::{apply_lambda, Grid};
use num_complex::Complex64;
use proptest::prelude::*;

fn grid() -> &'static Arc<Grid> {
    static G: OnceLock<Arc<Grid>> = OnceLock::new();
    G.get_or_init(|| Grid::new(512, 25.0).unwrap())
}

fn kappa0_one() -> f64 {
    static K: OnceLock<f64> = OnceLock::new();
    *K.get_or_init(|| find_kappa0(1.0, &Grid::new(1024, 30.0).unwrap()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn profile_even_and_positive(b in 0.0..2.0f64, omega in 0.5..2.0f64, r in -0.9..0.9f64) {
        let p = classify_params(b, omega, 2.0 * r * omega.sqrt());
        prop_assert_eq!(p.regime, Regime::Interior);
        let g = grid();
        let phi = profile_phi(&p, g).unwrap();
        let n = g.n();
        prop_assert!(phi.iter().all(|&v| v > 0.0));
        // nodes x_j and x_{n-j} are mirror images
        for j in 1..n / 2 {
            prop_assert!((phi[j] - phi[n - j]).abs() <= 1e-13 * phi[n / 2]);
        }
    }

    #[test]
    fn lambda_is_skew(s1 in 0u64..1000, s2 in 0u64..1000) {
        let g = grid();
        let (f, h) = (random_smooth(g, s1), random_smooth(g, s2));
        let lhs = apply_lambda(&f).dot(&h);
        let rhs = -f.dot(&apply_lambda(&h));
        prop_assert!((lhs - rhs).abs() < 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn conserved_gauge_and_translation_invariant(seed in 0u64..1000, theta in -3.0..3.0f64, y in -2.0..2.0f64) {
        let g = grid();
        let u = random_smooth(g, seed);
        let v = &u.translate(y) * Complex64::from_polar(1.0, theta);
        for b in [0.0, 1.0] {
            let (a, c) = (conserved(&u, b), conserved(&v, b));
            let scale = a.mass.max(1.0);
            prop_assert!((a.energy - c.energy).abs() < 1e-9 * scale);
            prop_assert!((a.mass - c.mass).abs() < 1e-9 * scale);
            prop_assert!((a.momentum - c.momentum).abs() < 1e-9 * scale);
        }
    }

    #[test]
    fn linearized_operator_is_symmetric(s1 in 0u64..1000, s2 in 0u64..1000, r in -0.8..0.8f64) {
        let g = grid();
        let sol = Soliton::new(classify_params(1.0, 1.0, 2.0 * r), g).unwrap();
        let (v, w) = (random_smooth(g, s1), random_smooth(g, s2));
        let a = apply_l(&sol, &v).unwrap().dot(&w);
        let b = v.dot(&apply_l(&sol, &w).unwrap());
        prop_assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()));
    }

    #[test]
    fn momentum_sign_pattern(kappa in -0.9..0.9f64) {
        let k0 = kappa0_one();
        prop_assume!((kappa - k0).abs() > 0.02);
        let g = Grid::new(1024, 30.0).unwrap();
        let p = normalized_momentum(1.0, kappa, &g).unwrap();
        if kappa < k0 {
            prop_assert!(p > 0.0, "P = {} at kappa = {}", p, kappa);
        } else {
            prop_assert!(p < 0.0, "P = {} at kappa = {}", p, kappa);
        }
    }

    #[test]
    fn tube_distance_vanishes_on_orbit(theta in -3.0..3.0f64, y in -3.0..3.0f64) {
        let g = grid();
        let sol = Soliton::new(classify_params(1.0, 1.0, 0.5), g).unwrap();
        let u = &sol.phi.translate(y) * Complex64::from_polar(1.0, theta);
        prop_assert!(tube_distance(&u, &sol).unwrap().distance < 1e-8);
    }

    #[test]
    fn translate_round_trip(seed in 0u64..1000, y in -4.0..4.0f64) {
        let g = grid();
        let u = random_smooth(g, seed);
        let back = u.translate(y).translate(-y);
        prop_assert!((&back - &u).max_abs() < 1e-11 * u.max_abs());
    }
}

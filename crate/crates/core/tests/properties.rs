//! Property tests. Derived quantities are compared with oracles written here
//! from the model equations, not with library helpers.

use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::RngSeed;

use dfhn_core::atlas::fast::RETURN_TOL;
use dfhn_core::atlas::{classify, cycle_average, AverageKind, ClassifierConfig, RegimeLabel};
use dfhn_core::bifurcation::{tau_fast_hopf, tau_full_hopf};
use dfhn_core::lambert::lambert_w;
use dfhn_core::manifold::critical_roots;
use dfhn_core::model::{FastParams, SystemParams};
use dfhn_core::solver::{History, SolverConfig};
use dfhn_core::spectrum::{fast_roots, fast_stability, full_rightmost_root, Verdict};

const J: f64 = 2.0;

/// Fixed seed so every run draws the same samples.
fn seeded(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, rng_seed: RngSeed::Fixed(0x5eed_d1f4), failure_persistence: None, ..ProptestConfig::default() }
}

/// Linearization of dx = x - x^3/3 + y + J (x - x_tau) at x* with y frozen.
fn oracle_fast(xi: Complex64, x_star: f64, j: f64, tau: f64) -> Complex64 {
    let c = 1.0 - x_star * x_star + j;
    xi - c + j * (-xi * tau).exp()
}

/// Full system at (a, y*): xi dx = c dx - J e^{-xi tau} dx + dy, xi dy = -eps dx.
/// Multiplying through by xi gives xi^2 - c xi + J xi e^{-xi tau} + eps.
fn oracle_full(xi: Complex64, a: f64, j: f64, tau: f64, eps: f64) -> Complex64 {
    let c = 1.0 - a * a + j;
    xi * xi - c * xi + j * xi * (-xi * tau).exp() + eps
}

/// Plain Newton with a numerical derivative.
fn newton_oracle<F: Fn(Complex64) -> Complex64>(f: F, mut z: Complex64) -> Option<Complex64> {
    for _ in 0..80 {
        let h = 1e-7 * z.norm().max(1.0);
        let d = (f(z + h) - f(z - h)) / (2.0 * h);
        if d.norm() == 0.0 {
            return None;
        }
        let step = f(z) / d;
        z -= step;
        if !(z.re.is_finite() && z.im.is_finite()) {
            return None;
        }
        if step.norm() < 1e-13 * z.norm().max(1.0) {
            return Some(z);
        }
    }
    None
}

fn cubic(x: f64, y: f64) -> f64 {
    x - x * x * x / 3.0 + y
}

proptest! {
    #![proptest_config(seeded(128))]

    #[test]
    fn critical_roots_satisfy_vieta(y in -0.66f64..0.66) {
        // x^3 - 3x - 3y = 0 has root sum 0, pair sum -3, product 3y.
        let r = critical_roots(y);
        prop_assert_eq!(r.len(), 3);
        let (a, b, c) = (r[0].x, r[1].x, r[2].x);
        prop_assert!((a + b + c).abs() < 1e-12);
        prop_assert!((a * b + b * c + a * c + 3.0).abs() < 1e-11);
        prop_assert!((a * b * c - 3.0 * y).abs() < 1e-11);
        for p in &r {
            prop_assert!(cubic(p.x, y).abs() < 1e-12);
        }
    }

    #[test]
    fn critical_roots_are_odd_in_y(y in -3.0f64..3.0) {
        let mut up: Vec<f64> = critical_roots(y).iter().map(|p| p.x).collect();
        let mut down: Vec<f64> = critical_roots(-y).iter().map(|p| -p.x).collect();
        up.sort_by(f64::total_cmp);
        down.sort_by(f64::total_cmp);
        prop_assert_eq!(up.len(), down.len());
        for (u, d) in up.iter().zip(&down) {
            prop_assert!((u - d).abs() < 1e-12);
        }
        if y.abs() > 0.67 {
            prop_assert_eq!(up.len(), 1);
        }
    }

    #[test]
    fn lambert_residual_and_conjugation(
        re in -50.0f64..50.0,
        im in -50.0f64..50.0,
        k in -4i32..=4,
    ) {
        let z = Complex64::new(re, im);
        prop_assume!(z.norm() > 1e-3 && im.abs() > 1e-6);
        let w = lambert_w(k, z).unwrap();
        let res = (w * w.exp() - z).norm() / z.norm();
        prop_assert!(res < 1e-12, "residual {res:e}");
        let wc = lambert_w(-k, z.conj()).unwrap();
        prop_assert!((wc - w.conj()).norm() < 1e-10 * w.norm().max(1.0));
    }

    #[test]
    fn zeta_pair_obeys_vieta(a in 1.0f64..5.0f64.sqrt(), eps in 1e-4f64..3.0, k in 0u32..4) {
        let hp = tau_full_hopf(a, J, eps, k).unwrap();
        let big_a = ((a * a - 1.0) * (1.0 + 2.0 * J - a * a)).max(0.0).sqrt();
        prop_assert!((hp.zeta1 * hp.zeta2 + eps).abs() < 1e-12);
        prop_assert!((hp.zeta1 + hp.zeta2 + big_a).abs() < 1e-12);
    }

    #[test]
    fn full_hopf_points_lie_on_the_imaginary_axis(a in 1.01f64..2.2, eps in 1e-3f64..0.5) {
        let hp = tau_full_hopf(a, J, eps, 0).unwrap();
        let xi = Complex64::new(0.0, hp.zeta1.abs());
        let r = oracle_full(xi, a, J, hp.tau1, eps);
        prop_assert!(r.norm() < 1e-10, "|F| = {:e}", r.norm());
    }
}

proptest! {
    #![proptest_config(seeded(48))]

    #[test]
    fn fast_roots_match_a_newton_grid(x_star in -2.5f64..2.5, tau in 0.1f64..3.0) {
        let roots = fast_roots(x_star, J, tau, 8).unwrap();
        let scale = 1.0 + J + x_star * x_star;
        for r in &roots {
            let z = r.value();
            prop_assert!(oracle_fast(z, x_star, J, tau).norm() < 1e-9 * scale);
            // Real coefficients: the conjugate is a root as well.
            prop_assert!(oracle_fast(z.conj(), x_star, J, tau).norm() < 1e-9 * scale);
        }
        let c = 1.0 - x_star * x_star + J;
        let mut best = f64::NEG_INFINITY;
        for i in 0..12 {
            for m in 0..12 {
                let z0 = Complex64::new(c - 4.0 + (J + 5.0) * i as f64 / 11.0, 12.0 * m as f64 / (11.0 * tau));
                if let Some(z) = newton_oracle(|z| oracle_fast(z, x_star, J, tau), z0) {
                    if oracle_fast(z, x_star, J, tau).norm() < 1e-9 * scale {
                        best = best.max(z.re);
                    }
                }
            }
        }
        prop_assert!(best <= roots[0].re + 1e-8, "grid found {best} right of {}", roots[0].re);
    }

    #[test]
    fn fast_stability_flips_at_the_hopf_delay(x_star in 1.05f64..2.2) {
        let tau0 = tau_fast_hopf(x_star, J, 0).unwrap().tau;
        prop_assert_eq!(fast_stability(x_star, J, 0.97 * tau0).unwrap().verdict, Verdict::Stable);
        prop_assert_eq!(fast_stability(x_star, J, 1.03 * tau0).unwrap().verdict, Verdict::Unstable);
        // Only x*^2 enters the linearization.
        let m = fast_stability(-x_star, J, 1.03 * tau0).unwrap();
        prop_assert_eq!(m.verdict, Verdict::Unstable);
    }

    #[test]
    fn full_stability_flips_at_the_first_hopf_delay(a in 1.05f64..2.0, eps in 0.005f64..0.1) {
        let tau1 = tau_full_hopf(a, J, eps, 0).unwrap().tau1;
        let below = full_rightmost_root(a, J, 0.97 * tau1, eps).unwrap();
        let above = full_rightmost_root(a, J, 1.03 * tau1, eps).unwrap();
        prop_assert_eq!(below.verdict, Verdict::Stable);
        prop_assert_eq!(above.verdict, Verdict::Unstable);
        let z = above.roots_found[0].value();
        prop_assert!(oracle_full(z, a, J, 1.03 * tau1, eps).norm() < 1e-8);
    }
}

fn fast_cfg(y: f64, tau: f64, x0: f64) -> (FastParams, SolverConfig) {
    let fp = FastParams::new(J, tau, y);
    let cfg = SolverConfig::for_fast(&fp).with_history(History::constant(x0, y));
    (fp, cfg)
}

proptest! {
    #![proptest_config(seeded(16))]

    #[test]
    fn fixed_point_averages_are_stable_roots(y in -2.0f64..2.0, tau in 0.2f64..1.5, x0 in -3.0f64..3.0) {
        let (fp, cfg) = fast_cfg(y, tau, x0);
        if let Ok(avg) = cycle_average(&fp, &cfg) {
            if avg.kind == AverageKind::FixedPoint {
                prop_assert!(cubic(avg.m, y).abs() < 1e-6, "residual {}", cubic(avg.m, y));
                prop_assert_ne!(fast_stability(avg.m, J, tau).unwrap().verdict, Verdict::Unstable);
            }
        }
    }

    #[test]
    fn cycle_average_is_odd_under_reflection(y in -1.5f64..1.5, tau in 0.3f64..1.5, x0 in -3.0f64..3.0) {
        let (fp, cfg) = fast_cfg(y, tau, x0);
        let (fq, cfq) = fast_cfg(-y, tau, -x0);
        match (cycle_average(&fp, &cfg), cycle_average(&fq, &cfq)) {
            (Ok(p), Ok(q)) => {
                prop_assert_eq!(p.kind, q.kind);
                prop_assert!((p.m + q.m).abs() < 1e-9, "{} vs {}", p.m, q.m);
                match (p.period, q.period) {
                    // Reflection turns up-crossings into down-crossings, so the
                    // two periods come from different returns matched at RETURN_TOL.
                    (Some(a), Some(b)) => prop_assert!((a - b).abs() < 10.0 * RETURN_TOL * a),
                    (None, None) => {}
                    other => prop_assert!(false, "period mismatch {other:?}"),
                }
            }
            (Err(_), Err(_)) => {}
            other => prop_assert!(false, "one side failed: {other:?}"),
        }
    }
}

proptest! {
    #![proptest_config(seeded(24))]

    #[test]
    fn classification_is_symmetric_in_a(a in 0.9f64..1.3, tau in 0.35f64..1.1) {
        let cc = ClassifierConfig::default();
        let p = SystemParams::new(J, a, 0.05, tau);
        let q = SystemParams::new(J, -a, 0.05, tau);
        let cp = SolverConfig::for_full(&p).with_history(History::constant(0.5, 0.1));
        let cq = SolverConfig::for_full(&q).with_history(History::constant(-0.5, -0.1));
        let lp = classify(&p, &cp, &cc).unwrap();
        let lq = classify(&q, &cq, &cc).unwrap();
        // The divergence estimate kicks both runs in +x, so it is not exactly
        // symmetric; skip points near the chaos threshold.
        let near = |r: Option<f64>| r.is_some_and(|l| (l - cc.chaos_threshold).abs() < 0.5 * cc.chaos_threshold);
        prop_assume!(!near(lp.stats.divergence_rate) && !near(lq.stats.divergence_rate));
        // Peaks are maxima of x, which reflect into minima, so peak counts may
        // differ by one; the label may not.
        prop_assert_eq!(lp.label, lq.label);
        prop_assert_eq!(lp.stats.period.is_some(), lq.stats.period.is_some());
    }

    #[test]
    fn classifier_agrees_with_the_spectrum(a in 1.05f64..2.0, tau in 0.05f64..1.5) {
        let eps = 0.05;
        let rep = full_rightmost_root(a, J, tau, eps).unwrap();
        prop_assume!(rep.rightmost_real_part.abs() > 0.01);
        let p = SystemParams::new(J, a, eps, tau);
        let eq = p.standard_equilibrium();
        let cfg = SolverConfig::for_full(&p).with_history(History::constant(eq.x + 0.01, eq.y));
        let c = classify(&p, &cfg, &ClassifierConfig::default()).unwrap();
        if rep.rightmost_real_part < 0.0 {
            prop_assert_eq!(c.label, RegimeLabel::Stationary);
        } else {
            prop_assert_ne!(c.label, RegimeLabel::Stationary);
        }
    }
}

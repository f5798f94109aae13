//! Lambert W on all branches by Halley iteration.
//!
//! Branch cuts follow the usual convention: points on the negative real axis
//! are taken on the upper side of the cut (arg z = +pi).

use std::f64::consts::{E, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};

const MAX_ITER: usize = 100;

fn initial_guess(k: i32, z: Complex64) -> Complex64 {
    let near_branch_point = (z + 1.0 / E).norm() < 0.3;
    let attached = k == 0 || (k == -1 && z.im >= 0.0) || (k == 1 && z.im < 0.0);
    if near_branch_point && attached {
        // Series in p = sqrt(2 (e z + 1)) about the branch point.
        let mut p = (2.0 * (E * z + 1.0)).sqrt();
        if k != 0 {
            p = -p;
        }
        return -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p;
    }
    let on_cut = z.im == 0.0 && z.re < -1.0 / E;
    if k == 0 && z.norm() < 1.0 && !on_cut {
        // Pade-like start for the principal branch near the origin.
        return z * (1.0 + 2.0 * z) / (1.0 + 3.0 * z + 0.5 * z * z);
    }
    let l1 = log_upper(z) + Complex64::new(0.0, 2.0 * PI * k as f64);
    let l2 = l1.ln();
    l1 - l2 + l2 / l1
}

/// Principal logarithm with the negative real axis mapped to arg = +pi.
fn log_upper(z: Complex64) -> Complex64 {
    if z.im == 0.0 && z.re < 0.0 {
        Complex64::new((-z.re).ln(), PI)
    } else {
        z.ln()
    }
}

/// W_k(z): the solution of w e^w = z on branch k.
pub fn lambert_w(k: i32, z: Complex64) -> Result<Complex64> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::BranchDomain { k, z: format!("{z}") });
    }
    if z == Complex64::new(0.0, 0.0) {
        return if k == 0 { Ok(z) } else { Err(Error::BranchDomain { k, z: format!("{z}") }) };
    }
    // Exact branch point.
    let bp = z + 1.0 / E;
    if bp.norm() < 1e-300 || (z.im == 0.0 && (z.re + 1.0 / E).abs() <= 4.0 * f64::EPSILON) {
        if k == 0 || k == -1 {
            return Ok(Complex64::new(-1.0, 0.0));
        }
    }
    let mut w = initial_guess(k, z);
    for _ in 0..MAX_ITER {
        let ew = w.exp();
        let f = w * ew - z;
        let wp1 = w + 1.0;
        if wp1.norm() < 1e-300 {
            break;
        }
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        let dw = f / denom;
        w -= dw;
        if dw.norm() <= 4.0 * f64::EPSILON * w.norm().max(1e-300) {
            break;
        }
    }
    if !(w.re.is_finite() && w.im.is_finite()) {
        return Err(Error::NoConvergence(format!("Lambert W_{k}({z}) diverged")));
    }
    Ok(w)
}

/// Real principal branch, for z >= -1/e.
pub fn lambert_w0_real(x: f64) -> Result<f64> {
    if x < -1.0 / E - 4.0 * f64::EPSILON {
        return Err(Error::BranchDomain { k: 0, z: format!("{x}") });
    }
    Ok(lambert_w(0, Complex64::new(x.max(-1.0 / E), 0.0))?.re)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(w: Complex64, z: Complex64) -> f64 {
        (w * w.exp() - z).norm() / z.norm().max(1e-300)
    }

    #[test]
    fn special_values() {
        assert_eq!(lambert_w(0, Complex64::new(0.0, 0.0)).unwrap(), Complex64::new(0.0, 0.0));
        let w = lambert_w(0, Complex64::new(E, 0.0)).unwrap();
        assert!((w - 1.0).norm() < 1e-15);
        let w = lambert_w(-1, Complex64::new(-1.0 / E, 0.0)).unwrap();
        assert!((w + 1.0).norm() < 1e-12);
        assert!(lambert_w(3, Complex64::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn real_branches_on_minus_segment() {
        for &x in &[-0.36, -0.3, -0.1, -1e-3] {
            let z = Complex64::new(x, 0.0);
            let w0 = lambert_w(0, z).unwrap();
            let wm = lambert_w(-1, z).unwrap();
            assert!(w0.im.abs() < 1e-12 && w0.re >= -1.0);
            assert!(wm.im.abs() < 1e-12 && wm.re <= -1.0, "{wm}");
            assert!(residual(w0, z) < 1e-13);
            assert!(residual(wm, z) < 1e-13);
        }
    }

    #[test]
    fn cut_conjugates() {
        // For real z < -1/e the branches 0 and -1 are complex conjugates.
        let z = Complex64::new(-2.0, 0.0);
        let w0 = lambert_w(0, z).unwrap();
        let wm = lambert_w(-1, z).unwrap();
        assert!(w0.im > 0.0);
        assert!((w0 - wm.conj()).norm() < 1e-13);
        assert!((w0 - Complex64::new(0.172_816_002_84, 1.673_686_413_740_842_7)).norm() < 1e-10);
    }

    #[test]
    fn many_branches_small_residual() {
        for k in -8..=8 {
            for &(re, im) in &[(-5.0, 0.0), (0.5, 2.0), (1e4, -3.0), (-0.2, 1e-3), (-1e-5, 0.0)] {
                let z = Complex64::new(re, im);
                if let Ok(w) = lambert_w(k, z) {
                    assert!(residual(w, z) < 1e-13, "k={k} z={z} w={w}");
                }
            }
        }
    }

    /// Reference values from an arbitrary-precision implementation.
    const REFERENCE: &[(i32, (f64, f64), (f64, f64))] = &[
        (-3, (-5.0, 0.0), (-1.036860547866646, -14.063573412696273)),
        (-3, (0.5, 2.0), (-2.046382090659268, -15.824336999868788)),
        (-3, (-0.2, 0.001), (-4.282852024163009, -13.842101745724612)),
        (-3, (-0.2, -0.001), (-4.640323957121888, -20.18943662871105)),
        (-3, (-1e-05, 0.0), (-14.49234970567815, -13.309238929051762)),
        (-3, (-2.0, 0.0), (-1.9554568662865854, -13.998373365367803)),
        (-3, (10000.0, -3.0), (6.28141279504019, -17.621480801752213)),
        (-3, (-0.3, 0.0), (-3.8708619766464136, -13.864915107123153)),
        (-2, (-5.0, 0.0), (-0.44591495054691577, -7.796852203818626)),
        (-2, (0.5, 2.0), (-1.5417555162306826, -9.509019255274936)),
        (-2, (-0.2, 0.001), (-3.7229031714577836, -7.392451142741216)),
        (-2, (-0.2, -0.001), (-4.2821678349886145, -13.831939521145111)),
        (-2, (-1e-05, 0.0), (-14.271406753613938, -6.72345816706489)),
        (-2, (-2.0, 0.0), (-1.3607494244085734, -7.678589079816594)),
        (-2, (10000.0, -3.0), (6.623592434974353, -11.517765795831274)),
        (-2, (-0.3, 0.0), (-3.3002378364383755, -7.436294411632747)),
        (-1, (-5.0, 0.0), (0.8448446054321697, -1.9750087548890338)),
        (-1, (0.5, 2.0), (-0.4636502824995209, -3.2446346827609265)),
        (-1, (-0.2, 0.001), (-2.542629412586395, -0.00824113177126165)),
        (-1, (-0.2, -0.001), (-3.7217113491348295, -7.3820120213028035)),
        (-1, (-1e-05, 0.0), (-14.163600815810183, 0.0)),
        (-1, (-2.0, 0.0), (0.17281600283999998, -1.6736864137408427)),
        (-1, (10000.0, -3.0), (7.015137300810773, -5.609013552429927)),
        (-1, (-0.3, 0.0), (-1.7813370234216277, 0.0)),
        (0, (-5.0, 0.0), (0.8448446054321697, 1.9750087548890338)),
        (0, (0.5, 2.0), (0.7476459546946329, 0.6275379916576808)),
        (0, (-0.2, 0.001), (-0.2591675069738788, 0.0017491852850348617)),
        (0, (-0.2, -0.001), (-0.2591675069738788, -0.0017491852850348617)),
        (0, (-1e-05, 0.0), (-1.0000100001500027e-05, 0.0)),
        (0, (-2.0, 0.0), (0.17281600283999998, 1.6736864137408427)),
        (0, (10000.0, -3.0), (7.231846077043392, -0.0002635561619881891)),
        (0, (-0.3, 0.0), (-0.4894022271802149, 0.0)),
        (1, (-5.0, 0.0), (-0.44591495054691577, 7.796852203818626)),
        (1, (0.5, 2.0), (-1.0606624170792107, 5.8591184910859475)),
        (1, (-0.2, 0.001), (-3.7217113491348295, 7.3820120213028035)),
        (1, (-0.2, -0.001), (-2.542629412586395, 0.00824113177126165)),
        (1, (-1e-05, 0.0), (-14.271406753613938, 6.72345816706489)),
        (1, (-2.0, 0.0), (-1.3607494244085734, 7.678589079816594)),
        (1, (10000.0, -3.0), (7.015172465073978, 5.608463803856001)),
        (1, (-0.3, 0.0), (-3.3002378364383755, 7.436294411632747)),
        (2, (-5.0, 0.0), (-1.036860547866646, 14.063573412696273)),
        (2, (0.5, 2.0), (-1.7866338910485153, 12.175693988905925)),
        (2, (-0.2, 0.001), (-4.2821678349886145, 13.831939521145111)),
        (2, (-0.2, -0.001), (-3.7229031714577836, 7.392451142741216)),
        (2, (-1e-05, 0.0), (-14.49234970567815, 13.309238929051762)),
        (2, (-2.0, 0.0), (-1.9554568662865854, 13.998373365367803)),
        (2, (10000.0, -3.0), (6.6236286588235584, 11.517189773018938)),
        (2, (-0.3, 0.0), (-3.8708619766464136, 13.864915107123153)),
        (3, (-5.0, 0.0), (-1.4060914613453996, 20.351371121776957)),
        (3, (0.5, 2.0), (-2.2005948907868422, 18.486094266216067)),
        (3, (-0.2, 0.001), (-4.640323957121888, 20.18943662871105)),
        (3, (-0.2, -0.001), (-4.282852024163009, 13.842101745724612)),
        (3, (-1e-05, 0.0), (-14.717924117875384, 19.780666140028114)),
        (3, (-2.0, 0.0), (-2.3242964400635935, 20.306386874090858)),
        (3, (10000.0, -3.0), (6.281441878871793, 17.620892819791973)),
        (3, (-0.3, 0.0), (-4.231794445392361, 20.213982816581154)),
        (0, (-0.9, 0.0), (-0.391432526121528, 1.27233757218957)),
        (-1, (-0.9, 0.0), (-0.391432526121528, -1.27233757218957)),
        (0, (-0.5, 0.1), (-0.560112571030067, 0.695208909609955)),
    ];

    #[test]
    fn matches_reference_branches() {
        for &(k, (zr, zi), (wr, wi)) in REFERENCE {
            let w = lambert_w(k, Complex64::new(zr, zi)).unwrap();
            let want = Complex64::new(wr, wi);
            assert!((w - want).norm() < 1e-11 * want.norm().max(1.0), "k={k} z=({zr},{zi}) got {w} want {want}");
        }
    }
}

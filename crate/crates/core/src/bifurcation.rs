//! Closed-form bifurcation objects of the fast and full systems.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{y_of_x, Y_FOLD};
use crate::normal_form::{lyap1_full, LyapunovResult};
use crate::solver::fmt17;

/// Distance from +-1 within which acos arguments are clamped.
const ACOS_GUARD: f64 = 1e-12;

/// Default number of Chebyshev samples per curve.
pub const DEFAULT_GRID: usize = 256;

fn guarded_acos(c: f64) -> Result<f64> {
    if !c.is_finite() || c.abs() > 1.0 + ACOS_GUARD {
        return Err(Error::Domain(format!("acos argument {c} outside [-1, 1]")));
    }
    Ok(c.clamp(-1.0, 1.0).acos())
}

/// Hopf point of the fast subsystem.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HopfPointFast {
    pub x_star: f64,
    pub y: f64,
    pub zeta: f64,
    pub tau: f64,
    pub k: u32,
}

/// Fast Hopf frequency sqrt(x^2 - 1) sqrt(2J + 1 - x^2).
pub fn fast_hopf_frequency(x_star: f64, j: f64) -> f64 {
    let x2 = x_star * x_star;
    (x2 - 1.0).sqrt() * (2.0 * j + 1.0 - x2).sqrt()
}

/// Delay of the k-th fast Hopf branch at equilibrium x*.
pub fn tau_fast_hopf(x_star: f64, j: f64, k: u32) -> Result<HopfPointFast> {
    if !(j > 0.0 && j.is_finite()) {
        return Err(Error::Domain(format!("J must be positive, got {j}")));
    }
    let x2 = x_star * x_star;
    if !(x2 > 1.0 && x2 < 1.0 + 2.0 * j) {
        return Err(Error::Domain(format!(
            "fast Hopf needs 1 < |x*| < sqrt(1 + 2J), got x* = {x_star}"
        )));
    }
    let zeta = fast_hopf_frequency(x_star, j);
    let theta = guarded_acos((1.0 - x2 + j) / j)?;
    let tau = (theta + 2.0 * PI * k as f64) / zeta;
    Ok(HopfPointFast { x_star, y: y_of_x(x_star), zeta, tau, k })
}

/// Hopf data of the full system at input a.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HopfPointFull {
    pub a: f64,
    /// sqrt((a^2 - 1)(1 + 2J - a^2)).
    pub big_a: f64,
    pub zeta1: f64,
    pub zeta2: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub k: u32,
}

/// Both full-system Hopf delays tau_1^k and tau_2^k at input a.
pub fn tau_full_hopf(a: f64, j: f64, epsilon: f64, k: u32) -> Result<HopfPointFull> {
    if !(j > 0.0 && j.is_finite()) {
        return Err(Error::Domain(format!("J must be positive, got {j}")));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Domain(format!("epsilon must be positive, got {epsilon}")));
    }
    let a2 = a * a;
    let top = 1.0 + 2.0 * j;
    if !(a.is_finite() && a2 >= 1.0 - 1e-14 && a2 <= top + 1e-14) {
        return Err(Error::Domain(format!("full Hopf needs 1 <= |a| <= sqrt(1 + 2J), got a = {a}")));
    }
    let big_a = ((a2 - 1.0).max(0.0) * (top - a2).max(0.0)).sqrt();
    let s = (big_a * big_a + 4.0 * epsilon).sqrt();
    let zeta1 = -0.5 * (big_a + s);
    // Stable form of (-A + s)/2.
    let zeta2 = 2.0 * epsilon / (big_a + s);
    let theta = guarded_acos(1.0 + (1.0 - a2) / j)?;
    let kk = 2.0 * PI * k as f64;
    let tau1 = (theta + kk) / zeta1.abs();
    let tau2 = (2.0 * PI * (k as f64 + 1.0) - theta) / zeta2;
    Ok(HopfPointFull { a, big_a, zeta1, zeta2, tau1, tau2, k })
}

/// Saddle-node bifurcation of the fast system, at y = +-2/3 for every tau.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaddleNodeLine {
    pub y: f64,
    pub tau_independent: bool,
}

pub fn saddle_node_lines() -> [SaddleNodeLine; 2] {
    [
        SaddleNodeLine { y: Y_FOLD, tau_independent: true },
        SaddleNodeLine { y: -Y_FOLD, tau_independent: true },
    ]
}

/// Bogdanov-Takens points (tau, y) = (1/J, +-2/3).
pub fn bt_points(j: f64) -> Result<[(f64, f64); 2]> {
    if !(j > 0.0 && j.is_finite()) {
        return Err(Error::Domain(format!("J must be positive, got {j}")));
    }
    Ok([(1.0 / j, Y_FOLD), (1.0 / j, -Y_FOLD)])
}

fn bt_side_check(j: f64, tau: f64) -> Result<f64> {
    if !(j > 0.0 && tau > 0.0 && j.is_finite() && tau.is_finite()) {
        return Err(Error::Domain(format!("need J > 0 and tau > 0, got J = {j}, tau = {tau}")));
    }
    let nu = j * tau - 1.0;
    if nu < 0.0 {
        return Err(Error::Domain(format!("homoclinic branch needs J tau >= 1, got {}", j * tau)));
    }
    Ok(nu)
}

/// Quadratic homoclinic approximation y = 2/3 - (98/25)(J tau - 1)^2 / tau
/// near the upper BT point. Mirror with -y for the lower point.
pub fn bt_homoclinic_approx(j: f64, tau: f64) -> Result<f64> {
    let nu = bt_side_check(j, tau)?;
    Ok(Y_FOLD - 98.0 / 25.0 * nu * nu / tau)
}

/// Leading-order homoclinic curve y = 2/3 - (441/100)(J tau - 1)^2 / tau^2,
/// from the Melnikov condition of the BT normal form of the fast system.
pub fn bt_homoclinic_melnikov(j: f64, tau: f64) -> Result<f64> {
    let nu = bt_side_check(j, tau)?;
    Ok(Y_FOLD - 441.0 / 100.0 * nu * nu / (tau * tau))
}

/// tau_f^0(x*) - [1/J + (x*^2 - 1)/(3 J^2)], which is O((x*^2 - 1)^2).
pub fn hopf_tangency_residual(j: f64, x_star: f64) -> Result<f64> {
    let x2 = x_star * x_star;
    if x2 == 1.0 {
        return Ok(0.0);
    }
    let hp = tau_fast_hopf(x_star, j, 0)?;
    Ok(hp.tau - (1.0 / j + (x2 - 1.0) / (3.0 * j * j)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurveLabel {
    HopfFast,
    HopfFull1,
    HopfFull2,
    SaddleNode,
    BogdanovTakens,
    HomoclinicApprox,
    FoldOfCycles,
}

impl CurveLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            CurveLabel::HopfFast => "hopf_fast",
            CurveLabel::HopfFull1 => "hopf_full_1",
            CurveLabel::HopfFull2 => "hopf_full_2",
            CurveLabel::SaddleNode => "saddle_node",
            CurveLabel::BogdanovTakens => "bt",
            CurveLabel::HomoclinicApprox => "homoclinic_approx",
            CurveLabel::FoldOfCycles => "fold_of_cycles",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveSample {
    /// a for full-system curves, x* for fast curves, tau for lines in y.
    pub param: f64,
    pub tau: f64,
    /// Frozen slow variable for fast-system curves.
    pub y: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BifurcationCurve {
    pub label: CurveLabel,
    pub k: Option<u32>,
    pub samples: Vec<CurveSample>,
}

/// Chebyshev-Lobatto points on [lo, hi], ascending, endpoints included.
pub fn chebyshev_lobatto(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n)
        .map(|i| {
            let c = -(PI * i as f64 / (n - 1) as f64).cos();
            let v = 0.5 * (lo + hi) + 0.5 * (hi - lo) * c;
            if i == 0 {
                lo
            } else if i == n - 1 {
                hi
            } else {
                v
            }
        })
        .collect()
}

/// Chebyshev-Gauss points on (lo, hi), ascending, endpoints excluded.
pub fn chebyshev_gauss(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let c = -(PI * (2 * i + 1) as f64 / (2 * n) as f64).cos();
            0.5 * (lo + hi) + 0.5 * (hi - lo) * c
        })
        .collect()
}

/// Full-system Hopf curves tau_1^k(a) and tau_2^k(a) on a in [1, sqrt(1 + 2J)].
pub fn full_hopf_curves(
    j: f64,
    epsilon: f64,
    k: u32,
    n: usize,
) -> Result<(BifurcationCurve, BifurcationCurve)> {
    let top = (1.0 + 2.0 * j).sqrt();
    let mut c1 = Vec::with_capacity(n);
    let mut c2 = Vec::with_capacity(n);
    for a in chebyshev_lobatto(1.0, top, n) {
        let hp = tau_full_hopf(a, j, epsilon, k)?;
        c1.push(CurveSample { param: a, tau: hp.tau1, y: None });
        c2.push(CurveSample { param: a, tau: hp.tau2, y: None });
    }
    Ok((
        BifurcationCurve { label: CurveLabel::HopfFull1, k: Some(k), samples: c1 },
        BifurcationCurve { label: CurveLabel::HopfFull2, k: Some(k), samples: c2 },
    ))
}

/// Fast Hopf curve tau_f^k in (y, tau) for x* in (1, sqrt(1 + 2J)) and its
/// mirror image x* -> -x*. The k = 0 branch starts at the BT point.
pub fn fast_hopf_curve(j: f64, k: u32, n: usize) -> Result<BifurcationCurve> {
    if !(j > 0.0) {
        return Err(Error::Domain(format!("J must be positive, got {j}")));
    }
    let top = (1.0 + 2.0 * j).sqrt();
    let mut upper = Vec::with_capacity(n + 1);
    if k == 0 {
        upper.push(CurveSample { param: 1.0, tau: 1.0 / j, y: Some(-Y_FOLD) });
    }
    for x in chebyshev_gauss(1.0, top, n) {
        let hp = tau_fast_hopf(x, j, k)?;
        upper.push(CurveSample { param: x, tau: hp.tau, y: Some(hp.y) });
    }
    let mut samples: Vec<CurveSample> = upper
        .iter()
        .rev()
        .map(|s| CurveSample { param: -s.param, tau: s.tau, y: s.y.map(|y| -y) })
        .collect();
    samples.extend(upper);
    Ok(BifurcationCurve { label: CurveLabel::HopfFast, k: Some(k), samples })
}

/// Homoclinic approximation near both BT points, sampled in tau on
/// [1/J, (1 + nu_max)/J].
pub fn homoclinic_approx_curve(j: f64, nu_max: f64, n: usize) -> Result<BifurcationCurve> {
    let mut samples = Vec::new();
    for tau in chebyshev_lobatto(1.0 / j, (1.0 + nu_max) / j, n) {
        let y = bt_homoclinic_approx(j, tau)?;
        samples.push(CurveSample { param: tau, tau, y: Some(y) });
    }
    let mirror: Vec<_> =
        samples.iter().map(|s| CurveSample { y: s.y.map(|y| -y), ..*s }).collect();
    samples.extend(mirror);
    Ok(BifurcationCurve { label: CurveLabel::HomoclinicApprox, k: None, samples })
}

/// Metadata line written before curve CSV rows.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurveMeta {
    pub j: f64,
    pub epsilon: Option<f64>,
    pub grid: usize,
}

/// CSV `label,k,param,tau,y` preceded by a `# {json}` metadata line.
pub fn write_curves_csv<W: Write>(mut w: W, meta: &CurveMeta, curves: &[BifurcationCurve]) -> Result<()> {
    writeln!(w, "# {}", serde_json::to_string(meta)?)?;
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["label", "k", "param", "tau", "y"])?;
    for c in curves {
        for s in &c.samples {
            wr.write_record([
                c.label.as_str().to_string(),
                c.k.map_or(String::new(), |k| k.to_string()),
                fmt17(s.param),
                fmt17(s.tau),
                s.y.map_or(String::new(), fmt17),
            ])?;
        }
    }
    wr.flush()?;
    Ok(())
}

/// Endpoint matching of the full Hopf branches.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContinuityReport {
    pub k: u32,
    /// |tau_1^k - tau_2^k| at a = sqrt(1 + 2J).
    pub right_gap: f64,
    /// |tau_2^k - tau_1^{k+1}| at a = 1.
    pub left_gap: f64,
    /// Common value at the right end, (2k + 1) pi / sqrt(eps).
    pub right_value: f64,
    /// Common value at the left end, (2k + 2) pi / sqrt(eps).
    pub left_value: f64,
    /// (tau(a_end -+ d) - tau(a_end)) / sqrt(d) for the decreasing d sequence,
    /// one row per branch end (tau_1 right, tau_2 right, tau_2 left, tau_1^{k+1} left).
    pub sqrt_slopes: Vec<[f64; 3]>,
    pub sqrt_behaviour_ok: bool,
}

/// Check that tau_1^k and tau_2^k join at a = sqrt(1 + 2J), that tau_2^k joins
/// tau_1^{k+1} at a = 1, and that each end has square-root local behaviour.
pub fn full_curve_continuity_check(j: f64, epsilon: f64, k: u32) -> Result<ContinuityReport> {
    let top = (1.0 + 2.0 * j).sqrt();
    let r = tau_full_hopf(top, j, epsilon, k)?;
    let l = tau_full_hopf(1.0, j, epsilon, k)?;
    let l_next = tau_full_hopf(1.0, j, epsilon, k + 1)?;
    let ds = [1e-4, 1e-6, 1e-8];
    let slope = |a_end: f64, dir: f64, kk: u32, first: bool| -> Result<[f64; 3]> {
        let base = tau_full_hopf(a_end, j, epsilon, kk)?;
        let b = if first { base.tau1 } else { base.tau2 };
        let mut out = [0.0; 3];
        for (i, d) in ds.iter().enumerate() {
            let p = tau_full_hopf(a_end + dir * d, j, epsilon, kk)?;
            let v = if first { p.tau1 } else { p.tau2 };
            out[i] = (v - b) / d.sqrt();
        }
        Ok(out)
    };
    let sqrt_slopes = vec![
        slope(top, -1.0, k, true)?,
        slope(top, -1.0, k, false)?,
        slope(1.0, 1.0, k, false)?,
        slope(1.0, 1.0, k + 1, true)?,
    ];
    // Finite, nonzero, and converging slopes in sqrt(d).
    let sqrt_behaviour_ok = sqrt_slopes.iter().all(|s| {
        s.iter().all(|v| v.is_finite())
            && s[2].abs() > 1e-8
            && (s[2] - s[1]).abs() <= 0.05 * s[2].abs() + 1e-6
    });
    Ok(ContinuityReport {
        k,
        right_gap: (r.tau1 - r.tau2).abs(),
        left_gap: (l.tau2 - l_next.tau1).abs(),
        right_value: r.tau1,
        left_value: l.tau2,
        sqrt_slopes,
        sqrt_behaviour_ok,
    })
}

/// Location of the sign change of the first Lyapunov coefficient along tau_1^0.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BautinPoint {
    pub a: f64,
    pub tau_s: f64,
    /// Bracket in a around the sign change.
    pub a_bracket: (f64, f64),
    pub tau_bracket: (f64, f64),
    pub ell1_left: f64,
    pub ell1_right: f64,
}

/// Bisect along tau_1^0(a) on the sign of the first Lyapunov coefficient.
/// The first sign change in increasing a is refined until the tau bracket is
/// below `tol_tau`.
pub fn bautin_locate(j: f64, epsilon: f64, tol_tau: f64) -> Result<BautinPoint> {
    let top = (1.0 + 2.0 * j).sqrt();
    let grid = chebyshev_gauss(1.0, top, 64);
    let ell = |a: f64| -> Result<LyapunovResult> { lyap1_full(j, epsilon, a) };
    let mut prev: Option<(f64, f64)> = None;
    let mut bracket = None;
    for &a in &grid {
        let l = ell(a)?.ell1;
        if let Some((pa, pl)) = prev {
            if pl.signum() != l.signum() {
                bracket = Some((pa, a, pl, l));
                break;
            }
        }
        prev = Some((a, l));
    }
    let (mut lo, mut hi, mut l_lo, mut l_hi) = bracket.ok_or(Error::NoSignChange)?;
    let tau_of = |a: f64| tau_full_hopf(a, j, epsilon, 0).map(|h| h.tau1);
    for _ in 0..200 {
        if (tau_of(hi)? - tau_of(lo)?).abs() <= tol_tau {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let lm = ell(mid)?.ell1;
        if lm.signum() == l_lo.signum() {
            lo = mid;
            l_lo = lm;
        } else {
            hi = mid;
            l_hi = lm;
        }
    }
    let a = 0.5 * (lo + hi);
    Ok(BautinPoint {
        a,
        tau_s: tau_of(a)?,
        a_bracket: (lo, hi),
        tau_bracket: (tau_of(lo)?, tau_of(hi)?),
        ell1_left: l_lo,
        ell1_right: l_hi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::{char_fn_fast, char_fn_full};
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;

    #[test]
    fn fast_hopf_closed_values() {
        let hp = tau_fast_hopf(3f64.sqrt(), 2.0, 0).unwrap();
        assert_abs_diff_eq!(hp.zeta, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(hp.tau, PI / 4.0, epsilon = 1e-15);
        let hp = tau_fast_hopf(3f64.sqrt(), 2.0, 1).unwrap();
        assert_abs_diff_eq!(hp.tau, 5.0 * PI / 4.0, epsilon = 1e-14);
        assert!(tau_fast_hopf(0.9, 2.0, 0).is_err());
        assert!(tau_fast_hopf(2.3, 2.0, 0).is_err());
        let near = tau_fast_hopf((1.0 + 1e-10f64).sqrt(), 2.0, 0).unwrap();
        assert_abs_diff_eq!(near.tau, 0.5, epsilon = 1e-8);
    }

    #[test]
    fn fast_hopf_root_is_imaginary() {
        for &x in &[1.1, 1.5, 2.0] {
            let hp = tau_fast_hopf(x, 2.0, 0).unwrap();
            let f = char_fn_fast(Complex64::new(0.0, hp.zeta), x, 2.0, hp.tau);
            assert!(f.norm() < 1e-12);
        }
    }

    #[test]
    fn full_hopf_endpoints() {
        let (j, eps) = (2.0, 0.01);
        let h = tau_full_hopf(1.0, j, eps, 0).unwrap();
        assert_eq!(h.tau1, 0.0);
        assert_abs_diff_eq!(h.tau2, 2.0 * PI / eps.sqrt(), epsilon = 1e-10);
        let h = tau_full_hopf(5f64.sqrt(), j, eps, 0).unwrap();
        assert_abs_diff_eq!(h.tau1, PI / eps.sqrt(), epsilon = 1e-10);
    }

    #[test]
    fn full_hopf_root_is_imaginary() {
        for &a in &[1.01, 1.3, 2.0] {
            let h = tau_full_hopf(a, 2.0, 0.01, 0).unwrap();
            let f1 = char_fn_full(Complex64::new(0.0, h.zeta1.abs()), a, 2.0, h.tau1, 0.01);
            let f2 = char_fn_full(Complex64::new(0.0, h.zeta2), a, 2.0, h.tau2, 0.01);
            assert!(f1.norm() < 1e-12 && f2.norm() < 1e-12, "{f1} {f2}");
        }
    }

    #[test]
    fn homoclinic_approx_values() {
        assert_eq!(bt_homoclinic_approx(2.0, 0.5).unwrap(), Y_FOLD);
        assert_abs_diff_eq!(bt_homoclinic_approx(2.0, 0.55).unwrap(), 0.595394, epsilon = 1e-6);
        assert!(bt_homoclinic_approx(2.0, 0.45).is_err());
        assert!(bt_homoclinic_approx(2.0, 0.56).unwrap() < bt_homoclinic_approx(2.0, 0.55).unwrap());
    }

    #[test]
    fn tangency_is_second_order() {
        let j = 2.0;
        assert!(hopf_tangency_residual(j, (1.0 + 1e-3f64).sqrt()).unwrap().abs() < 1e-5);
        let ratios: Vec<f64> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&u: &f64| hopf_tangency_residual(j, (1.0 + u).sqrt()).unwrap() / (u * u))
            .collect();
        for r in &ratios {
            assert!(r.abs() < 1.0, "{ratios:?}");
        }
        assert!((ratios[2] - ratios[1]).abs() < 0.1 * ratios[2].abs());
    }

    #[test]
    fn continuity_in_snaking_regime() {
        for k in 0..4 {
            let r = full_curve_continuity_check(2.0, 2.0, k).unwrap();
            assert!(r.right_gap < 1e-10 && r.left_gap < 1e-10, "{r:?}");
            assert_abs_diff_eq!(r.right_value, (2 * k + 1) as f64 * PI / 2f64.sqrt(), epsilon = 1e-10);
            assert_abs_diff_eq!(r.left_value, (2 * k + 2) as f64 * PI / 2f64.sqrt(), epsilon = 1e-10);
            assert!(r.sqrt_behaviour_ok, "{r:?}");
        }
    }

    #[test]
    fn curve_csv_has_meta_line() {
        let c = fast_hopf_curve(2.0, 0, 8).unwrap();
        let mut buf = Vec::new();
        write_curves_csv(&mut buf, &CurveMeta { j: 2.0, epsilon: None, grid: 8 }, &[c]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let mut lines = s.lines();
        assert!(lines.next().unwrap().starts_with("# {"));
        assert_eq!(lines.next().unwrap(), "label,k,param,tau,y");
        assert_eq!(s.lines().count(), 2 + 18);
    }
}

//! Characteristic functions of the linearized delay systems and their roots.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lambert::lambert_w;

/// Default tolerance on Re(xi) for a marginal verdict.
pub const TOL_MARGINAL: f64 = 1e-8;

/// Default Lambert branch range.
pub const DEFAULT_BRANCHES: i32 = 8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicRoot {
    pub re: f64,
    pub im: f64,
    /// Lambert branch index for fast-system roots.
    pub branch: Option<i32>,
    /// |char_fn| at the root.
    pub residual: f64,
}

impl CharacteristicRoot {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Stable,
    Unstable,
    Marginal,
}

impl Verdict {
    pub fn from_real_part(re: f64, tol: f64) -> Self {
        if re < -tol {
            Verdict::Stable
        } else if re > tol {
            Verdict::Unstable
        } else {
            Verdict::Marginal
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StabilityReport {
    pub rightmost_real_part: f64,
    /// Upper half-plane representatives, sorted by descending real part.
    pub roots_found: Vec<CharacteristicRoot>,
    pub verdict: Verdict,
}

impl StabilityReport {
    fn from_roots(mut roots: Vec<CharacteristicRoot>, tol: f64) -> Self {
        roots.sort_by(|a, b| b.re.total_cmp(&a.re).then(a.im.total_cmp(&b.im)));
        let rightmost = roots.first().map_or(f64::NEG_INFINITY, |r| r.re);
        StabilityReport {
            rightmost_real_part: rightmost,
            roots_found: roots,
            verdict: Verdict::from_real_part(rightmost, tol),
        }
    }
}

/// xi - (1 - x*^2 + J) + J e^{-xi tau}.
pub fn char_fn_fast(xi: Complex64, x_star: f64, j: f64, tau: f64) -> Complex64 {
    xi - (1.0 - x_star * x_star + j) + j * (-xi * tau).exp()
}

/// Derivative of [`char_fn_fast`] in xi.
pub fn char_fn_fast_deriv(xi: Complex64, j: f64, tau: f64) -> Complex64 {
    1.0 - j * tau * (-xi * tau).exp()
}

/// xi (xi - 1 + a^2 - J (1 - e^{-xi tau})) + eps.
pub fn char_fn_full(xi: Complex64, a: f64, j: f64, tau: f64, epsilon: f64) -> Complex64 {
    let e = (-xi * tau).exp();
    xi * (xi - 1.0 + a * a - j * (1.0 - e)) + epsilon
}

/// Derivative of [`char_fn_full`] in xi.
pub fn char_fn_full_deriv(xi: Complex64, a: f64, j: f64, tau: f64) -> Complex64 {
    let e = (-xi * tau).exp();
    2.0 * xi - 1.0 + a * a - j + j * e * (1.0 - xi * tau)
}

/// Characteristic function of the system with slow equation
/// eps (a + b x + gamma y), linearized at an equilibrium with fast coordinate x*:
/// (xi - A0 + J e^{-xi tau})(xi - eps gamma) - eps b with A0 = 1 - x*^2 + J.
///
/// For gamma = 0 and b = -1 this coincides with [`char_fn_full`] at x* = a.
pub fn char_fn_general(
    xi: Complex64,
    x_star: f64,
    j: f64,
    tau: f64,
    epsilon: f64,
    gamma: f64,
    b: f64,
) -> Complex64 {
    char_fn_fast(xi, x_star, j, tau) * (xi - epsilon * gamma) - epsilon * b
}

/// Derivative of [`char_fn_general`] in xi.
pub fn char_fn_general_deriv(
    xi: Complex64,
    x_star: f64,
    j: f64,
    tau: f64,
    epsilon: f64,
    gamma: f64,
) -> Complex64 {
    char_fn_fast_deriv(xi, j, tau) * (xi - epsilon * gamma) + char_fn_fast(xi, x_star, j, tau)
}

/// Newton iteration; returns the root when the step falls below tolerance.
pub fn newton<F>(f: F, mut z: Complex64, max_iter: usize) -> Option<Complex64>
where
    F: Fn(Complex64) -> (Complex64, Complex64),
{
    for _ in 0..max_iter {
        let (v, d) = f(z);
        if d.norm() == 0.0 || !v.is_finite() {
            return None;
        }
        let dz = v / d;
        z -= dz;
        if !z.is_finite() {
            return None;
        }
        if dz.norm() <= 1e-14 * z.norm().max(1.0) {
            return Some(z);
        }
    }
    let (v, _) = f(z);
    (v.norm() <= 1e-10 * z.norm().max(1.0)).then_some(z)
}

fn upper_rep(z: Complex64) -> Complex64 {
    let z = if z.im.abs() <= 1e-13 * z.norm().max(1.0) { Complex64::new(z.re, 0.0) } else { z };
    if z.im < 0.0 {
        z.conj()
    } else {
        z
    }
}

/// Roots A + W_k(-tau J e^{-tau A}) / tau, k in [-K, K], of [`char_fn_fast`].
///
/// Returns the closed upper half-plane representatives, Newton-polished and
/// sorted by descending real part.
pub fn fast_roots(x_star: f64, j: f64, tau: f64, k_max: i32) -> Result<Vec<CharacteristicRoot>> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidInput(format!("tau must be positive, got {tau}")));
    }
    if !(x_star.is_finite() && j.is_finite()) || k_max < 0 {
        return Err(Error::InvalidInput("non-finite fast-root inputs".into()));
    }
    let a0 = 1.0 - x_star * x_star + j;
    if j == 0.0 {
        return Ok(vec![CharacteristicRoot { re: a0 - j, im: 0.0, branch: Some(0), residual: 0.0 }]);
    }
    let z = Complex64::new(-tau * j * (-tau * a0).exp(), 0.0);
    let f = |xi: Complex64| (char_fn_fast(xi, x_star, j, tau), char_fn_fast_deriv(xi, j, tau));
    let mut out: Vec<CharacteristicRoot> = Vec::new();
    for k in -k_max..=k_max {
        let w = lambert_w(k, z)?;
        let guess = a0 + w / tau;
        let xi = newton(f, guess, 50).unwrap_or(guess);
        let xi = upper_rep(xi);
        let residual = char_fn_fast(xi, x_star, j, tau).norm();
        let dup = out.iter().any(|r| (r.value() - xi).norm() <= 1e-9 * xi.norm().max(1.0));
        if !dup {
            out.push(CharacteristicRoot { re: xi.re, im: xi.im, branch: Some(k), residual });
        }
    }
    out.sort_by(|a, b| b.re.total_cmp(&a.re).then(a.im.total_cmp(&b.im)));
    debug_assert!(
        out.iter()
            .filter(|r| r.branch.map_or(false, |k| k.abs() == k_max))
            .all(|r| k_max == 0 || r.re <= out[0].re),
        "outermost Lambert branch is rightmost"
    );
    Ok(out)
}

/// Stability of the fast-system equilibrium x* from its Lambert roots.
pub fn fast_stability(x_star: f64, j: f64, tau: f64) -> Result<StabilityReport> {
    let roots = fast_roots(x_star, j, tau, DEFAULT_BRANCHES)?;
    Ok(StabilityReport::from_roots(roots, TOL_MARGINAL))
}

#[derive(Clone, Copy, Debug)]
struct Rect {
    re0: f64,
    re1: f64,
    im0: f64,
    im1: f64,
}

impl Rect {
    fn corners(&self) -> [Complex64; 4] {
        [
            Complex64::new(self.re0, self.im0),
            Complex64::new(self.re1, self.im0),
            Complex64::new(self.re1, self.im1),
            Complex64::new(self.re0, self.im1),
        ]
    }

    fn centre(&self) -> Complex64 {
        Complex64::new(0.5 * (self.re0 + self.re1), 0.5 * (self.im0 + self.im1))
    }

    fn contains(&self, z: Complex64, slack: f64) -> bool {
        z.re >= self.re0 - slack
            && z.re <= self.re1 + slack
            && z.im >= self.im0 - slack
            && z.im <= self.im1 + slack
    }

    fn size(&self) -> f64 {
        (self.re1 - self.re0).max(self.im1 - self.im0)
    }
}

/// Winding number of f around the rectangle boundary, by phase tracking with
/// adaptive steps.
fn winding<F: Fn(Complex64) -> Complex64>(f: &F, r: &Rect) -> Result<i64> {
    let c = r.corners();
    let scale = r.size();
    let mut total = 0.0;
    for e in 0..4 {
        let (p0, p1) = (c[e], c[(e + 1) % 4]);
        let mut s = 0.0;
        let mut ds: f64 = 1.0 / 32.0;
        let mut v0 = f(p0);
        if v0.norm() < 1e-12 {
            return Err(Error::ContourOnRoot);
        }
        while s < 1.0 {
            let step = ds.min(1.0 - s);
            let v1 = f(p0 + (p1 - p0) * (s + step));
            if v1.norm() < 1e-12 {
                return Err(Error::ContourOnRoot);
            }
            let d = (v1 / v0).arg();
            if d.abs() > 0.25 {
                ds = step * 0.5;
                if ds * scale < 1e-12 {
                    return Err(Error::ContourOnRoot);
                }
                continue;
            }
            total += d;
            s += step;
            v0 = v1;
            if d.abs() < 0.05 {
                ds = (step * 2.0).min(0.25);
            }
        }
    }
    let n = total / (2.0 * PI);
    let rounded = n.round();
    if (n - rounded).abs() > 0.1 {
        return Err(Error::ContourOnRoot);
    }
    Ok(rounded as i64)
}

/// Winding number with small jitters of the rectangle when the contour hits
/// a root.
fn count_jittered<F: Fn(Complex64) -> Complex64>(f: &F, r: &mut Rect) -> Result<i64> {
    let mut last = Error::ContourOnRoot;
    for attempt in 0..6 {
        match winding(f, r) {
            Ok(n) => return Ok(n),
            Err(e @ Error::ContourOnRoot) => {
                last = e;
                let d = 1e-7 * r.size().max(1.0) * (attempt as f64 + 1.0) * 1.618;
                r.re0 -= d;
                r.re1 += 0.7 * d;
                r.im0 -= 0.3 * d;
                r.im1 += 0.9 * d;
            }
            Err(e) => return Err(e),
        }
    }
    Err(last)
}

/// All roots inside a rectangle, by recursive bisection of the argument count
/// followed by Newton polishing.
fn roots_in_rect<F, D>(f: &F, df: &D, r: Rect, depth: usize, out: &mut Vec<Complex64>) -> Result<()>
where
    F: Fn(Complex64) -> Complex64,
    D: Fn(Complex64) -> Complex64,
{
    let mut r = r;
    let n = count_jittered(f, &mut r)?;
    if n <= 0 {
        return Ok(());
    }
    if n == 1 || depth > 40 {
        let fd = |z: Complex64| (f(z), df(z));
        if let Some(z) = newton(fd, r.centre(), 60) {
            if r.contains(z, 1e-9 * r.size().max(1.0)) {
                if !out.iter().any(|w| (w - z).norm() < 1e-9 * z.norm().max(1.0)) {
                    out.push(z);
                }
                return Ok(());
            }
        }
        if depth > 40 {
            return Err(Error::NoConvergence("root isolation exceeded depth limit".into()));
        }
    }
    // Split along the longer side, slightly off-centre to avoid symmetric roots.
    let (a, b) = if r.re1 - r.re0 >= r.im1 - r.im0 {
        let m = r.re0 + 0.5017 * (r.re1 - r.re0);
        (Rect { re1: m, ..r }, Rect { re0: m, ..r })
    } else {
        let m = r.im0 + 0.4983 * (r.im1 - r.im0);
        (Rect { im1: m, ..r }, Rect { im0: m, ..r })
    };
    roots_in_rect(f, df, a, depth + 1, out)?;
    roots_in_rect(f, df, b, depth + 1, out)
}

fn rightmost_search<F, D>(f: F, df: D, a0: f64, j: f64, tau: f64, epsilon: f64) -> Result<StabilityReport>
where
    F: Fn(Complex64) -> Complex64,
    D: Fn(Complex64) -> Complex64,
{
    let mut c = 1.0 / tau;
    for _ in 0..=10 {
        let bound = a0.abs() + j.abs() * (c * tau).exp() + epsilon.abs() + 1.0;
        // Shift the lower edge off the real axis where real roots may sit.
        let rect = Rect { re0: -c, re1: bound, im0: -bound - 1.3e-3, im1: bound + 0.7e-3 };
        let mut found = Vec::new();
        roots_in_rect(&f, &df, rect, 0, &mut found)?;
        if !found.is_empty() {
            let roots = found
                .into_iter()
                .map(upper_rep)
                .fold(Vec::<Complex64>::new(), |mut acc, z| {
                    if !acc.iter().any(|w| (w - z).norm() < 1e-8 * z.norm().max(1.0)) {
                        acc.push(z);
                    }
                    acc
                })
                .into_iter()
                .map(|z| CharacteristicRoot { re: z.re, im: z.im, branch: None, residual: f(z).norm() })
                .collect();
            return Ok(StabilityReport::from_roots(roots, TOL_MARGINAL));
        }
        c += 1.0 / tau;
    }
    Err(Error::NoConvergence("no characteristic roots found after 10 contour expansions".into()))
}

/// Rightmost roots of [`char_fn_full`] by argument-principle counting.
pub fn full_rightmost_root(a: f64, j: f64, tau: f64, epsilon: f64) -> Result<StabilityReport> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidInput(format!("epsilon must be positive, got {epsilon}")));
    }
    if !(tau > 0.0 && tau.is_finite() && a.is_finite() && j.is_finite() && epsilon.is_finite()) {
        return Err(Error::InvalidInput("non-finite or non-positive parameters".into()));
    }
    let a0 = 1.0 - a * a + j;
    rightmost_search(
        |z| char_fn_full(z, a, j, tau, epsilon),
        |z| char_fn_full_deriv(z, a, j, tau),
        a0,
        j,
        tau,
        epsilon,
    )
}

/// Rightmost roots of [`char_fn_general`] at an equilibrium with fast coordinate x*.
pub fn general_rightmost_root(
    x_star: f64,
    j: f64,
    tau: f64,
    epsilon: f64,
    gamma: f64,
    b: f64,
) -> Result<StabilityReport> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidInput(format!("tau must be positive, got {tau}")));
    }
    let a0 = 1.0 - x_star * x_star + j;
    rightmost_search(
        |z| char_fn_general(z, x_star, j, tau, epsilon, gamma, b),
        |z| char_fn_general_deriv(z, x_star, j, tau, epsilon, gamma),
        a0.abs() + (epsilon * gamma).abs(),
        j,
        tau,
        (epsilon * b).abs().sqrt() + (epsilon * gamma).abs(),
    )
}

/// Write roots as CSV `re,im,branch,residual`.
pub fn write_roots_csv<W: std::io::Write>(w: W, roots: &[CharacteristicRoot]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["re", "im", "branch", "residual"])?;
    for r in roots {
        wr.write_record([
            crate::solver::fmt17(r.re),
            crate::solver::fmt17(r.im),
            r.branch.map_or(String::new(), |k| k.to_string()),
            format!("{:.3e}", r.residual),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn saddle_node_root_and_double_root_at_bt() {
        for &(j, tau) in &[(2.0, 0.3), (0.7, 4.0)] {
            assert!(char_fn_fast(c(0.0, 0.0), 1.0, j, tau).norm() < 1e-15);
        }
        let j = 2.0;
        assert!(char_fn_fast_deriv(c(0.0, 0.0), j, 1.0 / j).norm() < 1e-15);
    }

    #[test]
    fn zero_is_never_a_full_root() {
        assert_eq!(char_fn_full(c(0.0, 0.0), 1.3, 2.0, 0.7, 0.01), c(0.01, 0.0));
    }

    #[test]
    fn full_reduces_to_fast_at_zero_eps() {
        for &xi in &[c(0.3, 1.2), c(-1.0, 0.5), c(2.0, -3.0)] {
            let lhs = char_fn_full(xi, 1.4, 2.0, 0.8, 0.0);
            let rhs = xi * char_fn_fast(xi, 1.4, 2.0, 0.8);
            assert!((lhs - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn general_reduces_to_full() {
        for &xi in &[c(0.3, 1.2), c(-1.0, 0.5), c(2.0, -3.0)] {
            let lhs = char_fn_general(xi, 1.4, 2.0, 0.8, 0.05, 0.0, -1.0);
            let rhs = char_fn_full(xi, 1.4, 2.0, 0.8, 0.05);
            assert!((lhs - rhs).norm() < 1e-12);
        }
        // Large real xi: dominated by xi^2.
        assert!(char_fn_general(c(100.0, 0.0), 0.5, 2.0, 1.0, 0.05, -0.3, -1.0).re > 0.0);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let xi = c(0.4, 0.9);
        let h = 1e-6;
        let fd = (char_fn_full(xi + h, 1.3, 2.0, 0.7, 0.02) - char_fn_full(xi - h, 1.3, 2.0, 0.7, 0.02))
            / (2.0 * h);
        assert!((fd - char_fn_full_deriv(xi, 1.3, 2.0, 0.7)).norm() < 1e-8);
        let fd = (char_fn_general(xi + h, 1.3, 2.0, 0.7, 0.02, 0.4, -0.8)
            - char_fn_general(xi - h, 1.3, 2.0, 0.7, 0.02, 0.4, -0.8))
            / (2.0 * h);
        assert!((fd - char_fn_general_deriv(xi, 1.3, 2.0, 0.7, 0.02, 0.4)).norm() < 1e-8);
    }

    #[test]
    fn fast_roots_residuals_and_verdicts() {
        let roots = fast_roots(0.5, 2.0, 1.0, 8).unwrap();
        assert!(roots[0].re > 0.0);
        for r in &roots {
            assert!(r.residual < 1e-10 * r.value().norm().max(1.0), "{r:?}");
            assert!(r.im >= 0.0);
        }
        let roots = fast_roots(2.5, 2.0, 10.0, 8).unwrap();
        assert!(roots.iter().all(|r| r.re < 0.0));
    }

    #[test]
    fn full_verdicts() {
        assert_eq!(full_rightmost_root(3.0, 2.0, 0.8, 0.01).unwrap().verdict, Verdict::Stable);
        assert_eq!(full_rightmost_root(0.5, 2.0, 0.8, 0.01).unwrap().verdict, Verdict::Unstable);
    }

    #[test]
    fn full_roots_match_fast_roots_at_small_eps() {
        // As eps -> 0 the full spectrum approaches the fast roots plus zero.
        let rep = full_rightmost_root(1.5, 2.0, 0.9, 1e-9).unwrap();
        let fast = fast_roots(1.5, 2.0, 0.9, 8).unwrap();
        let best = fast[0].value();
        assert!(rep.roots_found.iter().any(|r| (r.value() - best).norm() < 1e-6));
    }
}

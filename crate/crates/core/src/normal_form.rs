//! Numerical center-manifold reduction at Hopf points and the first Lyapunov
//! coefficient.
//!
//! The linear part is u' = A0 u(t) + A1 u(t - tau). The nonlinearity acts on
//! the first component only, through the cubic x - x^3/3 expanded at x*.
//! The reduction is carried out in real coordinates on the center eigenspace:
//! basis Phi(theta) = [Re, Im](q e^{i w theta}), adjoint basis normalized by
//! the bilinear pairing, quadratic center-manifold profiles solved as a
//! linear boundary-value problem on [-tau, 0], and the planar cubic
//! coefficients fed to the standard real-form formula.

use nalgebra::{DMatrix, DVector, Matrix3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bifurcation::{tau_fast_hopf, tau_full_hopf};
use crate::error::{Error, Result};
use crate::manifold::{critical_roots, Branch, Y_FOLD};
use crate::model::{FastModel, FastParams, FullModel, State, SystemParams};
use crate::solver::{History, Integrator};
use crate::spectrum::{char_fn_fast, char_fn_fast_deriv, char_fn_full_deriv};

/// Simpson panels for the pairing quadrature.
pub const DEFAULT_PANELS: usize = 1 << 10;

/// Largest admissible condition number of the pairing matrix.
const MAX_PAIRING_COND: f64 = 1e8;

/// Relative change of ell1 allowed when the panel count is doubled.
const QUADRATURE_TOL: f64 = 1e-6;

/// Linearization u' = A0 u + A1 u(t - tau) at an equilibrium with fast
/// coordinate x*, evaluated at a Hopf point of frequency omega.
#[derive(Clone, Debug)]
pub struct HopfProblem {
    pub a0: DMatrix<f64>,
    pub a1: DMatrix<f64>,
    pub tau: f64,
    pub omega: f64,
    pub x_star: f64,
}

impl HopfProblem {
    /// Full system with slow equation eps (a + b x + gamma y).
    pub fn full(p: &SystemParams, x_star: f64, omega: f64) -> Self {
        let a0 = DMatrix::from_row_slice(
            2,
            2,
            &[1.0 - x_star * x_star + p.j, 1.0, p.epsilon * p.b, p.epsilon * p.gamma],
        );
        let a1 = DMatrix::from_row_slice(2, 2, &[-p.j, 0.0, 0.0, 0.0]);
        Self { a0, a1, tau: p.tau, omega, x_star }
    }

    /// Scalar fast subsystem.
    pub fn fast(j: f64, x_star: f64, tau: f64, omega: f64) -> Self {
        Self {
            a0: DMatrix::from_element(1, 1, 1.0 - x_star * x_star + j),
            a1: DMatrix::from_element(1, 1, -j),
            tau,
            omega,
            x_star,
        }
    }

    pub fn dim(&self) -> usize {
        self.a0.nrows()
    }

    /// Delta(lambda) = lambda I - A0 - A1 e^{-lambda tau}.
    pub fn delta(&self, lambda: Complex64) -> DMatrix<Complex64> {
        let n = self.dim();
        let e = (-lambda * self.tau).exp();
        DMatrix::from_fn(n, n, |i, j| {
            let id = if i == j { lambda } else { Complex64::new(0.0, 0.0) };
            id - self.a0[(i, j)] - self.a1[(i, j)] * e
        })
    }

    /// Second derivative of the nonlinearity: (-2 x* u_x v_x, 0, ...).
    fn quad(&self, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        out[0] = -2.0 * self.x_star * u[0] * v[0];
        out
    }

    /// Third derivative of the nonlinearity: (-2 u_x v_x w_x, 0, ...).
    fn cubic(&self, u: &DVector<f64>, v: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        out[0] = -2.0 * u[0] * v[0] * w[0];
        out
    }
}

/// Right null vector q of Delta(i w) with q_x = 1 and left null vector p.
fn null_vectors(pr: &HopfProblem) -> Result<(DVector<Complex64>, DVector<Complex64>, f64)> {
    let n = pr.dim();
    let d = pr.delta(Complex64::new(0.0, pr.omega));
    let scale = d.iter().map(|v| v.norm()).fold(1.0, f64::max);
    if n == 1 {
        let residual = d[(0, 0)].norm() / scale;
        return Ok((DVector::from_element(1, Complex64::new(1.0, 0.0)), DVector::from_element(1, Complex64::new(1.0, 0.0)), residual));
    }
    // Generic 2x2 case: q = (1, -d10/d11), p = (-d11/d01... ) from the kernel of rows.
    let (d00, d01, d10, d11) = (d[(0, 0)], d[(0, 1)], d[(1, 0)], d[(1, 1)]);
    let residual = (d00 * d11 - d01 * d10).norm() / (scale * scale);
    let q1 = if d11.norm() >= d01.norm() { -d10 / d11 } else { -d00 / d01 };
    // p Delta = 0: p0 d01 + p1 d11 = 0.
    let (p0, p1) = if d01.norm() >= d11.norm() {
        (-d11 / d01, Complex64::new(1.0, 0.0))
    } else {
        (Complex64::new(1.0, 0.0), -d01 / d11)
    };
    Ok((
        DVector::from_vec(vec![Complex64::new(1.0, 0.0), q1]),
        DVector::from_vec(vec![p0, p1]),
        residual,
    ))
}

fn re_im(v: &DVector<Complex64>) -> (DVector<f64>, DVector<f64>) {
    (v.map(|c| c.re), v.map(|c| c.im))
}

/// Result of the reduction, with the intermediate objects.
#[derive(Clone, Debug)]
pub struct NormalFormWorkspace {
    pub omega: f64,
    pub tau: f64,
    /// Right eigenvector with first component 1.
    pub q: DVector<Complex64>,
    /// Left eigenvector (row) of Delta(i w), before normalization.
    pub p: DVector<Complex64>,
    /// Normalized adjoint basis at s = 0 (2 x n).
    pub psi0: DMatrix<f64>,
    /// Pairing matrix of the unnormalized adjoint basis with Phi.
    pub pairing: DMatrix<f64>,
    /// Max deviation of the normalized pairing from the identity.
    pub pairing_residual: f64,
    /// Quadratic profiles h20, h11, h02 at theta = 0 and theta = -tau.
    pub h0: [DVector<f64>; 3],
    pub h_tau: [DVector<f64>; 3],
    /// Residual of the profile boundary condition.
    pub boundary_residual: f64,
    /// Planar coefficients after reflection: (f_xx, f_xy, f_yy, f_xxx, f_xxy, f_xyy, f_yyy) and g likewise.
    pub f_derivs: [f64; 7],
    pub g_derivs: [f64; 7],
    /// Real-form coefficient a of r' = a r^3.
    pub a_coeff: f64,
    /// First Lyapunov coefficient w * a.
    pub ell1: f64,
}

fn simpson<F: Fn(f64) -> DMatrix<f64>>(f: F, lo: f64, hi: f64, panels: usize) -> DMatrix<f64> {
    let n = panels + panels % 2;
    let h = (hi - lo) / n as f64;
    let mut acc = f(lo) + f(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += f(lo + i as f64 * h) * w;
    }
    acc * (h / 3.0)
}

fn kron_blocks(m3: &Matrix3<f64>, n: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(3 * n, 3 * n);
    for bi in 0..3 {
        for bj in 0..3 {
            for d in 0..n {
                out[(bi * n + d, bj * n + d)] = m3[(bi, bj)];
            }
        }
    }
    out
}

fn block_diag(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut out = DMatrix::zeros(3 * n, 3 * n);
    for b in 0..3 {
        out.view_mut((b * n, b * n), (n, n)).copy_from(a);
    }
    out
}

/// Run the reduction with the given number of Simpson panels.
pub fn reduce(pr: &HopfProblem, panels: usize) -> Result<NormalFormWorkspace> {
    let n = pr.dim();
    let (w, tau) = (pr.omega, pr.tau);
    if !(w > 0.0 && tau > 0.0 && w.is_finite() && tau.is_finite()) {
        return Err(Error::InvalidInput(format!("need omega > 0 and tau > 0, got {w}, {tau}")));
    }
    let (q, p, residual) = null_vectors(pr)?;
    if residual > 1e-8 {
        return Err(Error::NotOnHopfCurve { residual });
    }
    let iw = Complex64::new(0.0, w);
    let phi = |theta: f64| -> DMatrix<f64> {
        let v = q.map(|c| c * (iw * theta).exp());
        let (re, im) = re_im(&v);
        DMatrix::from_columns(&[re, im])
    };
    let psi_tilde = |s: f64| -> DMatrix<f64> {
        let v = p.map(|c| c * (-iw * s).exp());
        let (re, im) = re_im(&v);
        DMatrix::from_rows(&[re.transpose(), im.transpose()])
    };
    let pairing = &psi_tilde(0.0) * phi(0.0)
        + simpson(|xi| psi_tilde(xi + tau) * &pr.a1 * phi(xi), -tau, 0.0, panels);
    let sv = pairing.singular_values();
    let cond = sv.max() / sv.min();
    if !(cond.is_finite() && cond <= MAX_PAIRING_COND) {
        return Err(Error::IllConditioned(format!("pairing matrix condition number {cond:e}")));
    }
    let pinv = pairing
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::IllConditioned("singular pairing matrix".into()))?;
    let normalized = &pinv * &pairing;
    let pairing_residual = (normalized - DMatrix::<f64>::identity(2, 2)).amax();
    let psi0 = &pinv * psi_tilde(0.0);

    let phi0 = phi(0.0);
    let p1: DVector<f64> = phi0.column(0).into_owned();
    let p2: DVector<f64> = phi0.column(1).into_owned();
    // f2(z) = 1/2 B(Phi0 z, Phi0 z) = f20 z1^2 + f11 z1 z2 + f02 z2^2.
    let fq = [pr.quad(&p1, &p1) * 0.5, pr.quad(&p1, &p2), pr.quad(&p2, &p2) * 0.5];

    // Profiles H = (h20, h11, h02): H' = M H + G(theta).
    let m3 = Matrix3::new(0.0, -w, 0.0, 2.0 * w, 0.0, -2.0 * w, 0.0, w, 0.0);
    let m = kron_blocks(&m3, n);
    let mut g = DVector::<Complex64>::zeros(3 * n);
    let mut fstack = DVector::<f64>::zeros(3 * n);
    for (b, f) in fq.iter().enumerate() {
        let v = &psi0 * f;
        for d in 0..n {
            g[b * n + d] = q[d] * Complex64::new(v[0], -v[1]);
            fstack[b * n + d] = f[d];
        }
    }
    let mc = m.map(|v| Complex64::new(v, 0.0));
    let lhs = DMatrix::<Complex64>::identity(3 * n, 3 * n) * iw - &mc;
    let x = lhs
        .lu()
        .solve(&g)
        .ok_or_else(|| Error::IllConditioned("resonant particular solution".into()))?;
    let hp = |theta: f64| -> DVector<f64> { x.map(|c| (c * (iw * theta).exp()).re) };
    let g_at = |theta: f64| -> DVector<f64> { g.map(|c| (c * (iw * theta).exp()).re) };
    let hp0 = hp(0.0);
    let hpt = hp(-tau);
    let e_mtau = kron_blocks(&(m3 * (-tau)).exp(), n);
    let a0b = block_diag(&pr.a0);
    let a1b = block_diag(&pr.a1);
    let sys = &m - &a0b - &a1b * &e_mtau;
    let rhs = &a0b * &hp0 + &a1b * &hpt + &fstack - &m * &hp0 - g_at(0.0);
    let c = sys
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::IllConditioned("singular profile boundary system".into()))?;
    let h_at0 = &c + &hp0;
    let h_att = &e_mtau * &c + &hpt;
    let boundary = &m * &h_at0 - &a0b * &h_at0 - &a1b * &h_att - &fstack + g_at(0.0);
    let boundary_residual = boundary.amax() / (1.0 + h_at0.amax());
    let split = |v: &DVector<f64>| -> [DVector<f64>; 3] {
        [v.rows(0, n).into_owned(), v.rows(n, n).into_owned(), v.rows(2 * n, n).into_owned()]
    };
    let h0 = split(&h_at0);
    let h_tau = split(&h_att);

    // Monomial coefficients of the reduced field, per component.
    let quad = [&psi0 * &fq[0], &psi0 * &fq[1], &psi0 * &fq[2]];
    let b = |u: &DVector<f64>, v: &DVector<f64>| pr.quad(u, v);
    let cc = |u: &DVector<f64>, v: &DVector<f64>, z: &DVector<f64>| pr.cubic(u, v, z);
    let cub_raw = [
        b(&p1, &h0[0]) + cc(&p1, &p1, &p1) / 6.0,
        b(&p1, &h0[1]) + b(&p2, &h0[0]) + cc(&p1, &p1, &p2) * 0.5,
        b(&p1, &h0[2]) + b(&p2, &h0[1]) + cc(&p1, &p2, &p2) * 0.5,
        b(&p2, &h0[2]) + cc(&p2, &p2, &p2) / 6.0,
    ];
    let cub = cub_raw.map(|v| &psi0 * v);
    // Reflect z2 -> -y so that the linear part is rotation (-w y, w x).
    let derivs = |comp: usize, sign: f64| -> [f64; 7] {
        let c20 = quad[0][comp];
        let c11 = -quad[1][comp];
        let c02 = quad[2][comp];
        let d30 = cub[0][comp];
        let d21 = -cub[1][comp];
        let d12 = cub[2][comp];
        let d03 = -cub[3][comp];
        [2.0 * c20, c11, 2.0 * c02, 6.0 * d30, 2.0 * d21, 2.0 * d12, 6.0 * d03].map(|v| sign * v)
    };
    let f_derivs = derivs(0, 1.0);
    let g_derivs = derivs(1, -1.0);
    let [fxx, fxy, fyy, fxxx, _fxxy, fxyy, _fyyy] = f_derivs;
    let [gxx, gxy, gyy, _gxxx, gxxy, _gxyy, gyyy] = g_derivs;
    let a_coeff = (fxxx + fxyy + gxxy + gyyy) / 16.0
        + (fxy * (fxx + fyy) - gxy * (gxx + gyy) - fxx * gxx + fyy * gyy) / (16.0 * w);
    Ok(NormalFormWorkspace {
        omega: w,
        tau,
        q,
        p,
        psi0,
        pairing,
        pairing_residual,
        h0,
        h_tau,
        boundary_residual,
        f_derivs,
        g_derivs,
        a_coeff,
        ell1: w * a_coeff,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criticality {
    Supercritical,
    Subcritical,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Negative,
    Positive,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LyapunovResult {
    pub ell1: f64,
    pub sign: Sign,
    pub criticality: Criticality,
    pub omega: f64,
    pub tau: f64,
    /// Relative change of ell1 when the panel count is doubled.
    pub convergence_delta: f64,
    pub pairing_residual: f64,
    pub boundary_residual: f64,
}

/// First Lyapunov coefficient with the built-in quadrature convergence check.
pub fn lyap1(pr: &HopfProblem) -> Result<LyapunovResult> {
    let ws = reduce(pr, DEFAULT_PANELS)?;
    let fine = reduce(pr, 2 * DEFAULT_PANELS)?;
    let convergence_delta = (fine.ell1 - ws.ell1).abs() / ws.ell1.abs().max(1e-300);
    if convergence_delta > QUADRATURE_TOL && (fine.ell1 - ws.ell1).abs() > 1e-14 {
        return Err(Error::NoConvergence(format!(
            "pairing quadrature moved ell1 by {convergence_delta:e} relative"
        )));
    }
    if ws.pairing_residual > 1e-10 || ws.boundary_residual > 1e-8 {
        return Err(Error::IllConditioned(format!(
            "pairing residual {:e}, boundary residual {:e}",
            ws.pairing_residual, ws.boundary_residual
        )));
    }
    let (sign, criticality) = if ws.ell1 < 0.0 {
        (Sign::Negative, Criticality::Supercritical)
    } else {
        (Sign::Positive, Criticality::Subcritical)
    };
    Ok(LyapunovResult {
        ell1: ws.ell1,
        sign,
        criticality,
        omega: ws.omega,
        tau: ws.tau,
        convergence_delta,
        pairing_residual: ws.pairing_residual,
        boundary_residual: ws.boundary_residual,
    })
}

/// First Lyapunov coefficient of the full system at (a, tau_1^0(a)).
pub fn lyap1_full(j: f64, epsilon: f64, a: f64) -> Result<LyapunovResult> {
    let hp = tau_full_hopf(a, j, epsilon, 0)?;
    if hp.tau1 <= 0.0 {
        return Err(Error::Domain(format!("tau_1^0 vanishes at a = {a}")));
    }
    let p = SystemParams::new(j, a, epsilon, hp.tau1);
    lyap1(&HopfProblem::full(&p, a, hp.zeta1.abs()))
}

/// Equilibrium on the fast Hopf curve used for a given y: the fold-adjacent
/// branch when both outer branches qualify, otherwise the single eligible one.
pub fn fast_hopf_equilibrium(j: f64, y: f64) -> Result<f64> {
    let top = 1.0 + 2.0 * j;
    let eligible: Vec<(f64, Branch)> = critical_roots(y)
        .into_iter()
        .filter(|c| c.x * c.x > 1.0 && c.x * c.x < top)
        .map(|c| (c.x, c.branch))
        .collect();
    match eligible.len() {
        0 => Err(Error::Domain(format!("no equilibrium with 1 < |x| < sqrt(1 + 2J) at y = {y}"))),
        1 => Ok(eligible[0].0),
        _ => {
            let want = if y <= 0.0 { Branch::Upper } else { Branch::Lower };
            eligible
                .iter()
                .find(|(_, b)| *b == want)
                .map(|(x, _)| *x)
                .ok_or_else(|| Error::Domain(format!("no fold-adjacent branch at y = {y}")))
        }
    }
}

/// First Lyapunov coefficient of the fast system on tau_f^0 at frozen y.
pub fn lyap1_fast(j: f64, y: f64) -> Result<LyapunovResult> {
    if y.abs() == Y_FOLD {
        return Err(Error::Domain("y = +-2/3 is a Bogdanov-Takens point".into()));
    }
    let x = fast_hopf_equilibrium(j, y)?;
    let hp = tau_fast_hopf(x, j, 0)?;
    lyap1(&HopfProblem::fast(j, x, hp.tau, hp.zeta))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeOutcome {
    Supercritical,
    Subcritical,
    Inconclusive,
}

/// Result of a simulation probe past a Hopf point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProbeReport {
    pub outcome: ProbeOutcome,
    /// Late peak-to-peak amplitude of x at offsets delta and delta/4.
    pub amplitude: f64,
    pub amplitude_quarter: f64,
    /// Linear growth rate Re(xi) at the probed delay.
    pub growth_rate: f64,
}

/// Where to probe.
#[derive(Clone, Copy, Debug)]
pub enum ProbeTarget {
    /// Full system at (a, tau_1^0(a)).
    Full { j: f64, epsilon: f64, a: f64 },
    /// Fast system at (y, tau_f^0(y)).
    Fast { j: f64, y: f64 },
}

/// Default offset past the Hopf point.
pub const PROBE_DELTA_TAU: f64 = 5e-3;

/// Peak-to-peak amplitude above which the orbit has escaped the Hopf neighbourhood.
const ESCAPE_AMPLITUDE: f64 = 1.0;

fn growth_rate(target: &ProbeTarget, tau0: f64, omega: f64, dtau: f64) -> f64 {
    // First-order drift of the critical root: d xi / d tau = -F_tau / F_xi.
    let xi = Complex64::new(0.0, omega);
    let e = (-xi * tau0).exp();
    let d = match *target {
        ProbeTarget::Full { j, a, .. } => (j * xi * xi * e) / char_fn_full_deriv(xi, a, j, tau0),
        ProbeTarget::Fast { j, .. } => (j * xi * e) / char_fn_fast_deriv(xi, j, tau0),
    };
    d.re * dtau
}

fn late_amplitude(target: &ProbeTarget, tau: f64, t_end: f64) -> Result<f64> {
    let kick = 1e-3;
    let window_start = 0.75 * t_end;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut record = |s: State, t: f64| {
        if t >= window_start {
            lo = lo.min(s.x);
            hi = hi.max(s.x);
        }
    };
    match *target {
        ProbeTarget::Full { j, epsilon, a } => {
            let p = SystemParams::new(j, a, epsilon, tau);
            let e = p.standard_equilibrium();
            let h = History::constant(e.x + kick, e.y);
            let mut it = Integrator::new(FullModel(p), (tau / 20.0).min(1e-2), &h)?;
            while it.time() < t_end {
                it.step()?;
                if (it.current().x - e.x).abs() > 3.0 {
                    return Ok(f64::INFINITY);
                }
                record(it.current(), it.time());
            }
        }
        ProbeTarget::Fast { j, y } => {
            let x = fast_hopf_equilibrium(j, y)?;
            let h = History::constant(x + kick, y);
            let mut it = Integrator::new(FastModel(FastParams::new(j, tau, y)), (tau / 20.0).min(1e-2), &h)?;
            while it.time() < t_end {
                it.step()?;
                if (it.current().x - x).abs() > 3.0 * ESCAPE_AMPLITUDE {
                    return Ok(f64::INFINITY);
                }
                record(it.current(), it.time());
            }
        }
    }
    Ok(hi - lo)
}

/// Simulation-based criticality check just past a Hopf point.
///
/// Integrates from a 1e-3 kick of the equilibrium at tau0 + delta and at
/// tau0 + delta/4. Escape to amplitude above 1 means subcritical. Small
/// saturated amplitudes scaling like sqrt(delta) mean supercritical.
pub fn criticality_probe(target: ProbeTarget, delta_tau: f64) -> Result<ProbeReport> {
    let (tau0, omega) = match target {
        ProbeTarget::Full { j, epsilon, a } => {
            let hp = tau_full_hopf(a, j, epsilon, 0)?;
            (hp.tau1, hp.zeta1.abs())
        }
        ProbeTarget::Fast { j, y } => {
            let x = fast_hopf_equilibrium(j, y)?;
            let hp = tau_fast_hopf(x, j, 0)?;
            (hp.tau, hp.zeta)
        }
    };
    let mu = growth_rate(&target, tau0, omega, delta_tau);
    if delta_tau <= 0.0 || !(mu > 0.0) {
        return Ok(ProbeReport {
            outcome: ProbeOutcome::Inconclusive,
            amplitude: 0.0,
            amplitude_quarter: 0.0,
            growth_rate: mu,
        });
    }
    // Enough e-foldings for the slower of the two runs to saturate.
    let t_end = (4.0 * 30.0 / mu).clamp(200.0, 2e5);
    let amp = late_amplitude(&target, tau0 + delta_tau, t_end)?;
    let amp_q = late_amplitude(&target, tau0 + 0.25 * delta_tau, t_end)?;
    let outcome = if amp > ESCAPE_AMPLITUDE || amp_q > ESCAPE_AMPLITUDE {
        ProbeOutcome::Subcritical
    } else if amp > 2e-3 && amp_q > 0.0 && (1.4..=2.8).contains(&(amp / amp_q)) {
        ProbeOutcome::Supercritical
    } else {
        ProbeOutcome::Inconclusive
    };
    Ok(ProbeReport { outcome, amplitude: amp, amplitude_quarter: amp_q, growth_rate: mu })
}

/// Signatures of the Bogdanov-Takens point of the fast system.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BtReport {
    pub j: f64,
    pub tau: f64,
    /// F(0), F'(0), F''(0) of the fast characteristic function at x* = 1.
    pub f0: f64,
    pub f1: f64,
    pub f2: f64,
    /// Hopf tangency residual at x*^2 = 1 + 1e-3.
    pub tangency_residual: f64,
    /// Fitted c in tau_f^0 = 1/J + c sqrt(2/3 - |y|) + d (2/3 - |y|).
    pub sqrt_coefficient: f64,
    /// Same fit at the mirror point.
    pub sqrt_coefficient_mirror: f64,
    /// Leading-order prediction 2/(3 J^2).
    pub sqrt_coefficient_expected: f64,
}

fn sqrt_fit(j: f64, sign: f64) -> Result<f64> {
    // Least squares on [sqrt(d), d] for d geometric in [1e-4, 1e-2].
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for i in 0..=16 {
        let d = 1e-4 * 100f64.powf(i as f64 / 16.0);
        let y = sign * (Y_FOLD - d);
        let x = fast_hopf_equilibrium(j, y)?;
        let hp = tau_fast_hopf(x, j, 0)?;
        rows.push([d.sqrt(), d]);
        rhs.push(hp.tau - 1.0 / j);
    }
    let a = DMatrix::from_fn(rows.len(), 2, |i, k| rows[i][k]);
    let b = DVector::from_vec(rhs);
    let sol = (a.transpose() * &a)
        .lu()
        .solve(&(a.transpose() * b))
        .ok_or_else(|| Error::IllConditioned("square-root fit".into()))?;
    Ok(sol[0])
}

pub fn bt_local_check(j: f64) -> Result<BtReport> {
    if !(j > 0.0 && j.is_finite()) {
        return Err(Error::Domain(format!("J must be positive, got {j}")));
    }
    let tau = 1.0 / j;
    let zero = Complex64::new(0.0, 0.0);
    let f0 = char_fn_fast(zero, 1.0, j, tau).re;
    let f1 = char_fn_fast_deriv(zero, j, tau).re;
    let f2 = j * tau * tau;
    let tangency_residual = crate::bifurcation::hopf_tangency_residual(j, (1.0 + 1e-3f64).sqrt())?;
    Ok(BtReport {
        j,
        tau,
        f0,
        f1,
        f2,
        tangency_residual,
        sqrt_coefficient: sqrt_fit(j, -1.0)?,
        sqrt_coefficient_mirror: sqrt_fit(j, 1.0)?,
        sqrt_coefficient_expected: 2.0 / (3.0 * j * j),
    })
}

/// First Lyapunov coefficient at an arbitrary Hopf point of the system with
/// parameters `p` and equilibrium fast coordinate `x_star`, with frequency
/// `omega` (p.tau must be the Hopf delay).
pub fn lyap1_system(p: &SystemParams, x_star: f64, omega: f64) -> Result<LyapunovResult> {
    lyap1(&HopfProblem::full(p, x_star, omega))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Complex first Lyapunov coefficient c1 from the characteristic matrix,
    /// with q_x = 1 and p^H Delta'(i w) q = 1. Then a = Re(c1) / 4 in the real
    /// coordinates where u = Re(q) z1 + Im(q) z2.
    fn c1_oracle(pr: &HopfProblem) -> f64 {
        let n = pr.dim();
        let w = pr.omega;
        let iw = Complex64::new(0.0, w);
        let d = pr.delta(iw);
        // Null vectors from the first row and first column of Delta(i w).
        let one = Complex64::new(1.0, 0.0);
        let (q, p): (DVector<Complex64>, DVector<Complex64>) = if n == 1 {
            (DVector::from_element(1, one), DVector::from_element(1, one))
        } else {
            let q = DVector::from_vec(vec![one, -d[(0, 0)] / d[(0, 1)]]);
            // p^H Delta = 0 on the first column.
            let p = DVector::from_vec(vec![one, (-d[(0, 0)] / d[(1, 0)]).conj()]);
            (q, p)
        };
        let e = (-iw * pr.tau).exp();
        let dprime = DMatrix::from_fn(n, n, |i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            Complex64::new(id, 0.0) + pr.a1[(i, j)] * pr.tau * e
        });
        let norm = (p.adjoint() * &dprime * &q)[(0, 0)];
        let pn = p / norm.conj();
        let b = |u: &DVector<Complex64>, v: &DVector<Complex64>| {
            let mut o = DVector::zeros(n);
            o[0] = u[0] * v[0] * (-2.0 * pr.x_star);
            o
        };
        let c = |u: &DVector<Complex64>, v: &DVector<Complex64>, z: &DVector<Complex64>| {
            let mut o = DVector::zeros(n);
            o[0] = u[0] * v[0] * z[0] * -2.0;
            o
        };
        let qb = q.map(|c| c.conj());
        let h20 = pr.delta(2.0 * iw).lu().solve(&b(&q, &q)).unwrap();
        let h11 = pr.delta(Complex64::new(0.0, 0.0)).lu().solve(&b(&q, &qb)).unwrap();
        let inner = b(&qb, &h20) + b(&q, &h11) * Complex64::new(2.0, 0.0) + c(&q, &q, &qb);
        let c1 = (pn.adjoint() * inner)[(0, 0)] * 0.5;
        c1.re / 4.0
    }

    #[test]
    fn matches_complex_oracle_fast() {
        for &y in &[-1.2, -1.0, -0.8, -0.5, 0.3] {
            let x = fast_hopf_equilibrium(2.0, y).unwrap();
            let hp = tau_fast_hopf(x, 2.0, 0).unwrap();
            let pr = HopfProblem::fast(2.0, x, hp.tau, hp.zeta);
            let ws = reduce(&pr, DEFAULT_PANELS).unwrap();
            let want = c1_oracle(&pr);
            assert!((ws.a_coeff - want).abs() < 1e-8 * want.abs().max(1e-3), "y={y} {} {want}", ws.a_coeff);
        }
    }

    #[test]
    fn matches_complex_oracle_full() {
        for &(a, eps) in &[(1.01, 0.01), (1.3, 0.05), (1.8, 0.01), (1.001, 1e-3)] {
            let hp = tau_full_hopf(a, 2.0, eps, 0).unwrap();
            let p = SystemParams::new(2.0, a, eps, hp.tau1);
            let pr = HopfProblem::full(&p, a, hp.zeta1.abs());
            let ws = reduce(&pr, DEFAULT_PANELS).unwrap();
            let want = c1_oracle(&pr);
            assert!((ws.a_coeff - want).abs() < 1e-7 * want.abs().max(1e-6), "a={a} {} {want}", ws.a_coeff);
        }
    }

    #[test]
    fn workspace_invariants() {
        let hp = tau_full_hopf(1.2, 2.0, 0.05, 0).unwrap();
        let p = SystemParams::new(2.0, 1.2, 0.05, hp.tau1);
        let ws = reduce(&HopfProblem::full(&p, 1.2, hp.zeta1.abs()), DEFAULT_PANELS).unwrap();
        assert!(ws.pairing_residual < 1e-10);
        assert!(ws.boundary_residual < 1e-8);
    }

    #[test]
    fn off_curve_is_rejected() {
        let p = SystemParams::new(2.0, 1.2, 0.05, 0.9);
        let r = reduce(&HopfProblem::full(&p, 1.2, 0.7), DEFAULT_PANELS);
        assert!(matches!(r, Err(Error::NotOnHopfCurve { .. })));
    }

    #[test]
    fn fast_coefficients_positive() {
        for &y in &[-1.2, -1.0, -0.8] {
            let r = lyap1_fast(2.0, y).unwrap();
            assert!(r.ell1 > 0.0);
            assert_eq!(r.criticality, Criticality::Subcritical);
        }
    }

    #[test]
    fn bt_report() {
        let r = bt_local_check(2.0).unwrap();
        assert_eq!(r.f0, 0.0);
        assert!(r.f1.abs() < 1e-15);
        assert!((r.f2 - 0.5).abs() < 1e-15);
        assert!(r.tangency_residual.abs() < 1e-5);
        assert!((r.sqrt_coefficient / r.sqrt_coefficient_expected - 1.0).abs() < 0.1, "{r:?}");
        assert!((r.sqrt_coefficient - r.sqrt_coefficient_mirror).abs() < 1e-12);
    }

    #[test]
    fn zero_offset_probe_is_inconclusive() {
        let r = criticality_probe(ProbeTarget::Fast { j: 2.0, y: -1.0 }, 0.0).unwrap();
        assert_eq!(r.outcome, ProbeOutcome::Inconclusive);
    }
}

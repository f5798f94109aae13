//! Critical manifold x - x^3/3 + y = 0 and equilibria of the leaky system.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fold value of y.
pub const Y_FOLD: f64 = 2.0 / 3.0;

/// Band around |y| = 2/3 where the fold values are used directly.
const FOLD_BAND: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Lower,
    Middle,
    Upper,
    Unique,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Multiplicity {
    Simple,
    Double,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub x: f64,
    pub branch: Branch,
    pub multiplicity: Multiplicity,
}

/// y on the critical manifold above x.
pub fn y_of_x(x: f64) -> f64 {
    x * x * x / 3.0 - x
}

/// Residual of the critical-manifold cubic.
pub fn cubic_residual(x: f64, y: f64) -> f64 {
    x - x * x * x / 3.0 + y
}

fn newton_polish(x: f64, y: f64) -> f64 {
    let d = 1.0 - x * x;
    if d.abs() < 1e-8 {
        return x;
    }
    x - cubic_residual(x, y) / d
}

/// Roots of x - x^3/3 + y = 0, sorted ascending.
pub fn critical_roots(y: f64) -> Vec<CriticalPoint> {
    let simple = |x, branch| CriticalPoint { x, branch, multiplicity: Multiplicity::Simple };
    let ay = y.abs();
    if (ay - Y_FOLD).abs() <= FOLD_BAND {
        // Saddle-node: double root -sign(y), simple root 2 sign(y).
        let s = y.signum();
        let far = newton_polish(2.0 * s, y);
        return if s > 0.0 {
            vec![
                CriticalPoint { x: -1.0, branch: Branch::Lower, multiplicity: Multiplicity::Double },
                simple(far, Branch::Upper),
            ]
        } else {
            vec![
                simple(far, Branch::Lower),
                CriticalPoint { x: 1.0, branch: Branch::Upper, multiplicity: Multiplicity::Double },
            ]
        };
    }
    if ay > Y_FOLD {
        // x^3 - 3x - 3y = 0 with discriminant (3y/2)^2 - 1 > 0.
        let half_q = 1.5 * y;
        let sq = (half_q * half_q - 1.0).sqrt();
        let u = (half_q + half_q.signum() * sq).cbrt();
        let x = newton_polish(u + 1.0 / u, y);
        return vec![simple(x, Branch::Unique)];
    }
    let phi = (1.5 * y).clamp(-1.0, 1.0).acos() / 3.0;
    let two_pi_3 = 2.0 * std::f64::consts::PI / 3.0;
    let upper = newton_polish(2.0 * phi.cos(), y);
    let lower = newton_polish(2.0 * (phi + two_pi_3).cos(), y);
    let middle = newton_polish(2.0 * (phi + 2.0 * two_pi_3).cos(), y);
    vec![simple(lower, Branch::Lower), simple(middle, Branch::Middle), simple(upper, Branch::Upper)]
}

/// Evaluate one branch of the critical manifold.
pub fn branch_eval(branch: Branch, y: f64) -> Result<f64> {
    if !y.is_finite() {
        return Err(Error::InvalidInput(format!("y = {y}")));
    }
    let tol = 1e-12;
    let roots = critical_roots(y);
    match branch {
        Branch::Upper => {
            if y < -Y_FOLD - tol {
                return Err(Error::Domain(format!("upper branch needs y >= -2/3, got {y}")));
            }
            Ok(roots.last().unwrap().x)
        }
        Branch::Lower => {
            if y > Y_FOLD + tol {
                return Err(Error::Domain(format!("lower branch needs y <= 2/3, got {y}")));
            }
            Ok(roots[0].x)
        }
        Branch::Middle => {
            if y.abs() > Y_FOLD + tol {
                return Err(Error::Domain(format!("middle branch needs |y| <= 2/3, got {y}")));
            }
            Ok(match roots.len() {
                3 => roots[1].x,
                // At the fold the middle root coincides with the double root.
                _ => -y.signum(),
            })
        }
        Branch::Unique => {
            if roots.len() != 1 {
                return Err(Error::Domain(format!("three roots exist at y = {y}")));
            }
            Ok(roots[0].x)
        }
    }
}

/// Equilibrium of the system with slow equation eps (a + b x + gamma y).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneralEquilibrium {
    pub x: f64,
    pub y: f64,
    /// Cardano discriminant (q/2)^2 + (p/3)^3 of the depressed cubic; positive
    /// means a single real equilibrium.
    pub discriminant: f64,
}

/// Equilibria with gamma != 0: y = -(a + b x)/gamma and x - x^3/3 + y = 0.
pub fn general_equilibria(a: f64, b: f64, gamma: f64) -> Result<Vec<GeneralEquilibrium>> {
    if gamma == 0.0 {
        return Err(Error::DegenerateParameters(
            "gamma = 0: equilibria lie at x = -a/b on the critical manifold".into(),
        ));
    }
    if b == 0.0 {
        return Err(Error::DegenerateParameters("b = 0".into()));
    }
    if !(a.is_finite() && b.is_finite() && gamma.is_finite()) {
        return Err(Error::InvalidInput("non-finite parameters".into()));
    }
    // x^3 + p x + q = 0
    let p = 3.0 * (b / gamma - 1.0);
    let q = 3.0 * a / gamma;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    let f = |x: f64| x * x * x + p * x + q;
    let df = |x: f64| 3.0 * x * x + p;
    let polish = |mut x: f64| {
        for _ in 0..3 {
            let d = df(x);
            if d == 0.0 {
                break;
            }
            let dx = f(x) / d;
            x -= dx;
            if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
        x
    };
    let mut xs = if disc > 0.0 {
        let sq = disc.sqrt();
        let u = (-q / 2.0 + sq).cbrt();
        let v = (-q / 2.0 - sq).cbrt();
        vec![polish(u + v)]
    } else if p == 0.0 {
        vec![0.0]
    } else {
        let r = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * r)).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        (0..3)
            .map(|k| polish(r * (phi - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos()))
            .collect()
    };
    xs.sort_by(f64::total_cmp);
    Ok(xs
        .into_iter()
        .map(|x| GeneralEquilibrium { x, y: -(a + b * x) / gamma, discriminant: disc })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn roots_at_zero() {
        let r = critical_roots(0.0);
        assert_eq!(r.len(), 3);
        assert_abs_diff_eq!(r[0].x, -3f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(r[1].x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r[2].x, 3f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn fold_structure() {
        let r = critical_roots(2.0 / 3.0);
        assert_eq!(r.len(), 2);
        assert_eq!(r[0].x, -1.0);
        assert_eq!(r[0].multiplicity, Multiplicity::Double);
        assert_abs_diff_eq!(r[1].x, 2.0, epsilon = 1e-15);
        let r = critical_roots(-2.0 / 3.0);
        assert_eq!(r[1].x, 1.0);
        assert_abs_diff_eq!(r[0].x, -2.0, epsilon = 1e-15);
        assert_eq!(critical_roots(2.0 / 3.0 - 1e-6).len(), 3);
        assert_eq!(critical_roots(2.0 / 3.0 + 1e-6).len(), 1);
    }

    #[test]
    fn branch_values() {
        assert_abs_diff_eq!(branch_eval(Branch::Upper, -2.0 / 3.0).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(branch_eval(Branch::Upper, 2.0 / 3.0).unwrap(), 2.0, epsilon = 1e-14);
        assert_eq!(branch_eval(Branch::Middle, 0.0).unwrap(), 0.0);
        assert!(matches!(branch_eval(Branch::Lower, 0.7), Err(Error::Domain(_))));
        assert!(matches!(branch_eval(Branch::Middle, -0.7), Err(Error::Domain(_))));
    }

    #[test]
    fn general_equilibria_cases() {
        let eq = general_equilibria(0.0, -1.0, -0.3).unwrap();
        assert!(eq.iter().any(|e| e.x.abs() < 1e-15));
        assert!(matches!(general_equilibria(1.0, -1.0, 0.0), Err(Error::DegenerateParameters(_))));
        // Large leak relative to the cubic gives a unique equilibrium.
        let eq = general_equilibria(0.4, -1.0, -0.5).unwrap();
        assert_eq!(eq.len(), 1);
        assert!(eq[0].discriminant > 0.0);
    }
}

//! Finite-time divergence rate of nearby delayed trajectories.

use crate::error::{Error, Result};
use crate::model::{FullModel, State, SystemParams};
use crate::solver::{Integrator, SolverConfig};

/// Initial separation along x.
pub const DIVERGENCE_DELTA: f64 = 1e-8;

/// Largest-exponent estimate by repeated renormalisation once per delay.
///
/// The separation is the sup norm over the last delay interval of the
/// state difference; the perturbed window is pulled back along the
/// difference so that this norm returns to the initial separation.
pub fn divergence_rate(p: &SystemParams, cfg: &SolverConfig) -> Result<f64> {
    let window = (cfg.t_end - cfg.t_discard).max(0.0);
    let renorms = ((window / p.tau).floor() as usize).max(200);
    divergence_rate_with(p, cfg, renorms, DIVERGENCE_DELTA)
}

pub fn divergence_rate_with(p: &SystemParams, cfg: &SolverConfig, renorms: usize, delta: f64) -> Result<f64> {
    cfg.validate()?;
    if renorms == 0 || !(delta > 0.0) {
        return Err(Error::InvalidConfig("divergence needs renorms > 0 and delta > 0".into()));
    }
    let mut reference = Integrator::new(FullModel(*p), cfg.h_max, &cfg.history)?;
    reference.advance_to(cfg.t_discard)?;
    let mut pert = Integrator::new(FullModel(*p), cfg.h_max, &cfg.history)?;
    pert.advance_to(cfg.t_discard)?;
    pert.edit_window(|s, _| {
        let last = s.len() - 1;
        s[last].x += delta;
    });
    let m = reference.steps_per_delay();
    let mut sum = 0.0;
    for _ in 0..renorms {
        reference.advance(m)?;
        pert.advance(m)?;
        let (rs, rd) = reference.window();
        let (rs, rd) = (rs.to_vec(), rd.to_vec());
        let d = separation(pert.window().0, &rs);
        if !(d > 0.0) {
            // Trajectories merged to round-off; restart the separation.
            sum += f64::EPSILON.ln();
            pert.edit_window(|s, _| {
                let last = s.len() - 1;
                s.copy_from_slice(&rs);
                s[last].x += delta;
            });
            continue;
        }
        sum += (d / delta).ln();
        let scale = delta / d;
        pert.edit_window(|s, ds| {
            for k in 0..s.len() {
                s[k] = rs[k].add(s[k].sub(rs[k]).scale(scale));
                ds[k] = rd[k].add(ds[k].sub(rd[k]).scale(scale));
            }
        });
    }
    Ok(sum / (renorms as f64 * p.tau))
}

/// Sup-norm distance between two runs of states.
pub fn separation(a: &[State], b: &[State]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u.x - v.x).abs().max((u.y - v.y).abs())).fold(0.0, f64::max)
}

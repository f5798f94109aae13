//! Simulation-based constructs for the fast subsystem: cycle averages,
//! the augmented slow manifold, and basin-boundary locators.
//!
//! The locators below are approximate. They bisect on qualitative fates of
//! trajectories and do not continue invariant manifolds.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::bifurcation::tau_fast_hopf;
use crate::error::{Error, Result};
use crate::manifold::{critical_roots, Branch, Y_FOLD};
use crate::model::{FastModel, FastParams};
use crate::solver::{fmt17, integrate, Coordinate, Direction, EventSpec, History, SolverConfig, Trajectory};
use crate::spectrum::{fast_stability, Verdict};

/// Return-matching tolerance for cycle detection.
pub const RETURN_TOL: f64 = 1e-6;
/// Offset of saddle-adjacent histories.
pub const SADDLE_OFFSET: f64 = 1e-6;
/// Peak-to-peak amplitude of a large fast cycle.
pub const LARGE_CYCLE: f64 = 2.0;
/// Tail spread below which an orbit counts as converged.
pub const CONVERGED_SPREAD: f64 = 1e-3;

const FATE_H_MAX: f64 = 5e-3;

/// Final state of a fast trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Fate {
    FixedPoint { x: f64 },
    LargeCycle { lo: f64, hi: f64 },
    Other { lo: f64, hi: f64 },
}

impl Fate {
    pub fn is_large_cycle(&self) -> bool {
        matches!(self, Fate::LargeCycle { .. })
    }

    pub fn converged_to(&self, x: f64) -> bool {
        matches!(self, Fate::FixedPoint { x: v } if (v - x).abs() < CONVERGED_SPREAD)
    }
}

fn tail_range(tr: &Trajectory, span: f64) -> (f64, f64) {
    let from = tr.index_at((tr.t_end() - span).max(0.0));
    tr.states()[from..]
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), s| (l.min(s.x), h.max(s.x)))
}

/// Integrate the fast system from a constant history and classify the tail
/// (last 4 tau + 20 time units).
pub fn fast_fate(fp: &FastParams, x0: f64, t_end: f64) -> Result<Fate> {
    fp.validate()?;
    let cfg = SolverConfig::new(SolverConfig::default_h_max(fp.tau).min(FATE_H_MAX), t_end, 0.0, History::constant(x0, fp.y));
    let tr = integrate(FastModel(*fp), &cfg)?;
    let (lo, hi) = tail_range(&tr, 4.0 * fp.tau + 20.0);
    Ok(if hi - lo < CONVERGED_SPREAD {
        Fate::FixedPoint { x: 0.5 * (lo + hi) }
    } else if hi - lo > LARGE_CYCLE {
        Fate::LargeCycle { lo, hi }
    } else {
        Fate::Other { lo, hi }
    })
}

fn fate_time(fp: &FastParams) -> f64 {
    (400.0f64).max(200.0 * fp.tau)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AverageKind {
    FixedPoint,
    Cycle,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleAverage {
    pub m: f64,
    pub kind: AverageKind,
    pub period: Option<f64>,
}

/// Exact integral of the Hermite interpolant of x over [t0, t1].
fn integrate_x(tr: &Trajectory, t0: f64, t1: f64) -> Result<f64> {
    let h = tr.h();
    let simpson = |a: f64, b: f64| -> Result<f64> {
        if b <= a {
            return Ok(0.0);
        }
        let fa = tr.dense_eval(a)?.x;
        let fm = tr.dense_eval(0.5 * (a + b))?.x;
        let fb = tr.dense_eval(b)?.x;
        Ok((b - a) / 6.0 * (fa + 4.0 * fm + fb))
    };
    let i0 = (t0 / h).ceil() as usize;
    let i1 = (t1 / h).floor() as usize;
    if i1 <= i0 {
        return simpson(t0, t1);
    }
    let (s, d) = (tr.states(), tr.derivs());
    let mut sum = simpson(t0, i0 as f64 * h)? + simpson(i1 as f64 * h, t1)?;
    for k in i0..i1 {
        sum += h / 2.0 * (s[k].x + s[k + 1].x) + h * h / 12.0 * (d[k].x - d[k + 1].x);
    }
    Ok(sum)
}

fn average_once(tr: &Trajectory) -> Result<Option<CycleAverage>> {
    let start = tr.index_at(tr.t_discard());
    let tail = &tr.states()[start..];
    let (lo, hi) = tail.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), s| (l.min(s.x), h.max(s.x)));
    let last = tail.last().map_or(0.0, |s| s.x);
    if hi - lo < RETURN_TOL {
        return Ok(Some(CycleAverage { m: last, kind: AverageKind::FixedPoint, period: None }));
    }
    if hi - lo < CONVERGED_SPREAD {
        // Still settling onto a point.
        return Ok(None);
    }
    let level = 0.5 * (lo + hi);
    let c = tr.detect_crossings(&EventSpec::new(Coordinate::X, level, Direction::Up));
    let n = c.len();
    for p in 1..=32usize {
        if n < 2 * p + 1 {
            break;
        }
        let matches = (1..=p).all(|q| {
            let (a, b) = (&c[n - q], &c[n - q - p]);
            (a.x_delayed - b.x_delayed).abs() < RETURN_TOL && (a.state.x - b.state.x).abs() < RETURN_TOL
        });
        if matches {
            let (t0, t1) = (c[n - 1 - p].t, c[n - 1].t);
            let m = integrate_x(tr, t0, t1)? / (t1 - t0);
            return Ok(Some(CycleAverage { m, kind: AverageKind::Cycle, period: Some(t1 - t0) }));
        }
    }
    Ok(None)
}

/// Time average of x on the attractor reached from `cfg.history`.
///
/// The run is extended up to four times its length before giving up.
pub fn cycle_average(fp: &FastParams, cfg: &SolverConfig) -> Result<CycleAverage> {
    fp.validate()?;
    let base = cfg.clone();
    for factor in [1.0, 2.0, 4.0] {
        let c = base.clone().with_times(base.t_discard + factor * (base.t_end - base.t_discard), base.t_discard * factor);
        let tr = integrate(FastModel(*fp), &c)?;
        if let Some(avg) = average_once(&tr)? {
            return Ok(avg);
        }
    }
    Err(Error::NonConvergent(format!("no fixed point or cycle detected at y = {}, tau = {}", fp.y, fp.tau)))
}

/// Critical-branch point with its fast stability.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub x: f64,
    pub branch: Branch,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AverageEntry {
    /// Constant initial value of x.
    pub history: f64,
    pub average: Option<CycleAverage>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifoldPoint {
    pub y: f64,
    pub branches: Vec<BranchPoint>,
    pub averages: Vec<AverageEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentedSlowManifold {
    pub j: f64,
    pub tau: f64,
    pub points: Vec<ManifoldPoint>,
}

/// Constant histories used to sample the attractors at each y.
pub const MANIFOLD_HISTORIES: [f64; 3] = [-3.0, 0.0, 3.0];

/// Critical manifold plus cycle averages on a y grid.
pub fn augmented_manifold(j: f64, tau: f64, y_grid: &[f64]) -> Result<AugmentedSlowManifold> {
    FastParams::new(j, tau, 0.0).validate()?;
    let points = y_grid
        .iter()
        .map(|&y| {
            let fp = FastParams::new(j, tau, y);
            let branches = critical_roots(y)
                .into_iter()
                .map(|c| {
                    let verdict = fast_stability(c.x, j, tau).map_or(Verdict::Marginal, |r| r.verdict);
                    BranchPoint { x: c.x, branch: c.branch, verdict }
                })
                .collect();
            let averages = MANIFOLD_HISTORIES
                .iter()
                .map(|&x0| {
                    let cfg = SolverConfig::for_fast(&fp).with_history(History::constant(x0, y));
                    match cycle_average(&fp, &cfg) {
                        Ok(a) => AverageEntry { history: x0, average: Some(a), error: None },
                        Err(e) => AverageEntry { history: x0, average: None, error: Some(e.to_string()) },
                    }
                })
                .collect();
            ManifoldPoint { y, branches, averages }
        })
        .collect();
    Ok(AugmentedSlowManifold { j, tau, points })
}

impl AugmentedSlowManifold {
    /// CSV rows `y,kind,history,x,verdict,period`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["y", "kind", "history", "x", "verdict", "period"])?;
        for p in &self.points {
            for b in &p.branches {
                wr.write_record([
                    fmt17(p.y),
                    format!("{:?}", b.branch),
                    String::new(),
                    fmt17(b.x),
                    format!("{:?}", b.verdict),
                    String::new(),
                ])?;
            }
            for a in &p.averages {
                let (x, kind, period) = match &a.average {
                    Some(c) => (fmt17(c.m), format!("{:?}", c.kind), c.period.map(fmt17).unwrap_or_default()),
                    None => (String::new(), "NonConvergent".to_string(), String::new()),
                };
                wr.write_record([fmt17(p.y), kind, fmt17(a.history), x, String::new(), period])?;
            }
        }
        wr.flush()?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PredictedRegime {
    Stationary,
    FastSpiking,
    Bursting,
}

/// Singular-limit prediction for the full system with slow nullcline x = a.
///
/// Stationary when the equilibrium lies on a stable branch, fast spiking
/// when x = a meets the cycle-average curve, bursting otherwise.
pub fn predict_regime(man: &AugmentedSlowManifold, a: f64) -> Result<PredictedRegime> {
    let eq = fast_stability(a, man.j, man.tau)?;
    if eq.verdict == Verdict::Stable {
        return Ok(PredictedRegime::Stationary);
    }
    // Stable crossings of m(y) = a along each history column: the averaged
    // slow flow dy/dt = eps (a - m(y)) needs m increasing in y.
    for col in 0..MANIFOLD_HISTORIES.len() {
        let cyc: Vec<Option<(f64, f64)>> = man
            .points
            .iter()
            .map(|p| {
                p.averages.get(col).and_then(|e| e.average).filter(|c| c.kind == AverageKind::Cycle).map(|c| (p.y, c.m))
            })
            .collect();
        for w in cyc.windows(2) {
            if let [Some((y0, m0)), Some((y1, m1))] = *w {
                let (g0, g1) = (m0 - a, m1 - a);
                let increasing = (m1 - m0) * (y1 - y0) > 0.0;
                if increasing && g0 * g1 <= 0.0 {
                    return Ok(PredictedRegime::FastSpiking);
                }
            }
        }
    }
    Ok(PredictedRegime::Bursting)
}

/// Fold of large fast cycles on one side of y = 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlcEstimate {
    pub y: f64,
    /// Largest |y| with a cycle and smallest |y| without one.
    pub bracket: (f64, f64),
    pub approximate: bool,
}

const FLC_TOL: f64 = 1e-4;

fn has_large_cycle(j: f64, tau: f64, y: f64) -> Result<bool> {
    let fp = FastParams::new(j, tau, y);
    let t = fate_time(&fp);
    for x0 in [3.0, -3.0] {
        if fast_fate(&fp, x0, t)?.is_large_cycle() {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Bisection in y (sign +1 or -1) on the existence of a sustained large
/// cycle from constant histories x = +-3.
pub fn flc_locate(j: f64, tau: f64, sign: f64) -> Result<FlcEstimate> {
    if sign == 0.0 || !sign.is_finite() {
        return Err(Error::InvalidInput("sign must be +1 or -1".into()));
    }
    let s = sign.signum();
    FastParams::new(j, tau, 0.0).validate()?;
    if !has_large_cycle(j, tau, 0.0)? {
        return Err(Error::NoCycleAtStart);
    }
    let mut lo = 0.0;
    let mut hi = Y_FOLD;
    while has_large_cycle(j, tau, s * hi)? {
        lo = hi;
        hi *= 1.5;
        if hi > 50.0 {
            return Err(Error::NoConvergence("large cycle persists for all tested y".into()));
        }
    }
    while hi - lo > FLC_TOL {
        let mid = 0.5 * (lo + hi);
        if has_large_cycle(j, tau, s * mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(FlcEstimate { y: s * 0.5 * (lo + hi), bracket: (s * lo, s * hi), approximate: true })
}

/// Basin-boundary proxy for the unstable fast cycle: the constant history
/// value above the upper stable point separating convergence to a stable
/// point from convergence to the large cycle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleBracket {
    pub lo: f64,
    pub hi: f64,
    pub fixed_point: f64,
    pub approximate: bool,
}

const BRACKET_TOL: f64 = 1e-4;

pub fn unstable_cycle_bracket(fp: &FastParams) -> Result<CycleBracket> {
    fp.validate()?;
    let roots = critical_roots(fp.y);
    let xp = roots.last().map(|c| c.x).ok_or(Error::NotBistable)?;
    if fast_stability(xp, fp.j, fp.tau)?.verdict != Verdict::Stable {
        return Err(Error::NotBistable);
    }
    let t = fate_time(fp);
    let mut lo = xp + 1e-3;
    if !fast_fate(fp, lo, t)?.converged_to(xp) {
        return Err(Error::NotBistable);
    }
    let mut hi = None;
    let mut step = 0.5;
    while step <= 16.0 {
        let c = xp + step;
        if fast_fate(fp, c, t)?.is_large_cycle() {
            hi = Some(c);
            break;
        }
        lo = c;
        step *= 2.0;
    }
    let mut hi = hi.ok_or(Error::NotBistable)?;
    while hi - lo > BRACKET_TOL {
        let mid = 0.5 * (lo + hi);
        let mut f = fast_fate(fp, mid, t)?;
        if matches!(f, Fate::Other { .. }) {
            // Long transients near the basin boundary.
            f = fast_fate(fp, mid, 4.0 * t)?;
        }
        if f.is_large_cycle() {
            hi = mid;
        } else if matches!(f, Fate::FixedPoint { .. }) {
            lo = mid;
        } else {
            return Err(Error::NoConvergence(format!("undecided fate at history {mid}")));
        }
    }
    Ok(CycleBracket { lo, hi, fixed_point: xp, approximate: true })
}

/// Homoclinic-proxy delays for the saddle at y, one per side.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomoclinicEstimate {
    pub y: f64,
    pub saddle: f64,
    /// From the history saddle + offset (towards the upper point).
    pub tau_plus: Option<f64>,
    /// From the history saddle - offset (towards the lower point).
    pub tau_minus: Option<f64>,
    pub approximate: bool,
}

impl HomoclinicEstimate {
    /// Average of the available one-sided estimates.
    pub fn tau(&self) -> Option<f64> {
        match (self.tau_plus, self.tau_minus) {
            (Some(a), Some(b)) => Some(0.5 * (a + b)),
            (a, b) => a.or(b),
        }
    }
}

const HOM_TOL: f64 = 1e-4;

fn side_estimate(j: f64, y: f64, saddle: f64, target: f64) -> Result<Option<f64>> {
    let s = (target - saddle).signum();
    let reaches = |tau: f64| -> Result<bool> {
        let fp = FastParams::new(j, tau, y);
        Ok(fast_fate(&fp, saddle + s * SADDLE_OFFSET, fate_time(&fp))?.converged_to(target))
    };
    let mut lo = (1.0 + 1e-3) / j;
    let mut hi = match tau_fast_hopf(target, j, 0) {
        Ok(h) => h.tau,
        Err(_) => return Ok(None),
    };
    if hi <= lo || !reaches(lo)? || reaches(hi)? {
        return Ok(None);
    }
    while hi - lo > HOM_TOL {
        let mid = 0.5 * (lo + hi);
        if reaches(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

/// Delay at which an unstable manifold of the middle equilibrium stops
/// reaching its neighbouring stable point, found by bisection in tau.
pub fn homoclinic_proxy(j: f64, y: f64) -> Result<HomoclinicEstimate> {
    FastParams::new(j, 1.0, y).validate()?;
    if !(y.abs() < Y_FOLD) {
        return Err(Error::Domain(format!("homoclinic proxy needs |y| < 2/3, got {y}")));
    }
    let r = critical_roots(y);
    let (lower, saddle, upper) = (r[0].x, r[1].x, r[2].x);
    let tau_plus = side_estimate(j, y, saddle, upper)?;
    let tau_minus = side_estimate(j, y, saddle, lower)?;
    if tau_plus.is_none() && tau_minus.is_none() {
        return Err(Error::NoSignChange);
    }
    Ok(HomoclinicEstimate { y, saddle, tau_plus, tau_minus, approximate: true })
}

/// Near-BT homoclinic estimate at tau = (1 + nu)/J.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BtHomoclinicEstimate {
    pub nu: f64,
    pub tau: f64,
    pub y: f64,
    /// 2/3 - y.
    pub distance: f64,
    pub approximate: bool,
}

/// Bisection in y below the fold on whether the history saddle - offset
/// ends below the saddle.
pub fn homoclinic_proxy_near_bt(j: f64, nu: f64) -> Result<BtHomoclinicEstimate> {
    if !(nu > 0.0 && nu < 1.0) {
        return Err(Error::Domain(format!("nu must lie in (0, 1), got {nu}")));
    }
    let tau = (1.0 + nu) / j;
    FastParams::new(j, tau, 0.0).validate()?;
    let escapes_down = |y: f64| -> Result<bool> {
        let fp = FastParams::new(j, tau, y);
        let saddle = critical_roots(y)[1].x;
        Ok(match fast_fate(&fp, saddle - SADDLE_OFFSET, fate_time(&fp).max(800.0))? {
            Fate::FixedPoint { x } => x < saddle,
            Fate::LargeCycle { hi, .. } | Fate::Other { hi, .. } => hi < saddle,
        })
    };
    let mut lo = 0.3;
    let mut hi = Y_FOLD - 1e-7;
    if !escapes_down(lo)? || escapes_down(hi)? {
        return Err(Error::NoSignChange);
    }
    for _ in 0..30 {
        let mid = 0.5 * (lo + hi);
        if escapes_down(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let y = lo;
    Ok(BtHomoclinicEstimate { nu, tau, y, distance: Y_FOLD - y, approximate: true })
}

/// A curve in the (x_{t - tau}, x_t) plane.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PortraitCurve {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Constant histories at each unstable equilibrium offset by +-1e-6.
pub fn saddle_histories(fp: &FastParams) -> Result<Vec<(String, History)>> {
    let mut out = Vec::new();
    for c in critical_roots(fp.y) {
        if fast_stability(c.x, fp.j, fp.tau)?.verdict == Verdict::Unstable {
            for s in [1.0, -1.0] {
                let x0 = c.x + s * SADDLE_OFFSET;
                out.push((format!("saddle{:+.6}{}", c.x, if s > 0.0 { "+" } else { "-" }), History::constant(x0, fp.y)));
            }
        }
    }
    Ok(out)
}

/// Post-transient projections onto (x_{t - tau}, x_t), one point per step.
pub fn portrait(fp: &FastParams, histories: &[(String, History)], cfg: &SolverConfig) -> Result<Vec<PortraitCurve>> {
    fp.validate()?;
    histories
        .iter()
        .map(|(label, h)| {
            let tr = integrate(FastModel(*fp), &cfg.clone().with_history(h.clone()))?;
            let start = tr.index_at(tr.t_discard());
            let points = (start..tr.len()).map(|i| (tr.x_delayed_at(i), tr.states()[i].x)).collect();
            Ok(PortraitCurve { label: label.clone(), points })
        })
        .collect()
}

/// CSV rows `curve,x_delayed,x`.
pub fn write_portrait_csv<W: Write>(w: W, curves: &[PortraitCurve]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["curve", "x_delayed", "x"])?;
    for c in curves {
        for &(xd, x) in &c.points {
            wr.write_record([c.label.clone(), fmt17(xd), fmt17(x)])?;
        }
    }
    wr.flush()?;
    Ok(())
}

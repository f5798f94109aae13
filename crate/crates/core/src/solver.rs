//! Fixed-step RK4 method of steps for a single constant delay.
//!
//! The step is `h = tau / m` so every delayed node lookup lands on a stored node.
//! Half-step delayed values come from cubic Hermite interpolation using the
//! derivative stored at each node.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DelayModel, FastParams, State, SystemParams};

/// Magnitude beyond which an integration is declared divergent.
pub const BLOWUP_BOUND: f64 = 1e6;

/// Initial function on [-tau, 0].
#[derive(Clone)]
pub enum History {
    Constant(State),
    /// Arbitrary function of t in [-tau, 0]. Node derivatives are taken by
    /// central differences.
    Function(Arc<dyn Fn(f64) -> State + Send + Sync>),
}

impl fmt::Debug for History {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            History::Constant(s) => f.debug_tuple("Constant").field(s).finish(),
            History::Function(_) => f.write_str("Function(..)"),
        }
    }
}

impl History {
    pub fn constant(x: f64, y: f64) -> Self {
        History::Constant(State::new(x, y))
    }

    fn value(&self, t: f64) -> State {
        match self {
            History::Constant(s) => *s,
            History::Function(f) => f(t),
        }
    }

    fn derivative(&self, t: f64, tau: f64) -> State {
        match self {
            History::Constant(_) => State::default(),
            History::Function(f) => {
                let d = 1e-6 * tau.max(1.0);
                let lo = (t - d).max(-tau);
                let hi = (t + d).min(0.0);
                f(hi).sub(f(lo)).scale(1.0 / (hi - lo))
            }
        }
    }
}

/// Integration settings.
#[derive(Clone, Debug)]
pub struct SolverConfig {
    /// Requested maximal step; the actual step divides tau.
    pub h_max: f64,
    /// Final time T.
    pub t_end: f64,
    /// Transient dropped by analysis routines.
    pub t_discard: f64,
    pub history: History,
}

impl SolverConfig {
    pub fn new(h_max: f64, t_end: f64, t_discard: f64, history: History) -> Self {
        Self { h_max, t_end, t_discard, history }
    }

    pub fn default_h_max(tau: f64) -> f64 {
        (tau / 20.0).min(1e-2)
    }

    /// Defaults for the full system: transient max(50/eps, 10 tau), analysis
    /// window max(60/eps, 100 tau), constant history (0, 0).
    pub fn for_full(p: &SystemParams) -> Self {
        let (t_discard, window) = if p.epsilon > 0.0 {
            ((50.0 / p.epsilon).max(10.0 * p.tau), (60.0 / p.epsilon).max(100.0 * p.tau))
        } else {
            (20.0 * p.tau, 100.0 * p.tau)
        };
        Self {
            h_max: Self::default_h_max(p.tau),
            t_end: t_discard + window,
            t_discard,
            history: History::constant(0.0, 0.0),
        }
    }

    /// Defaults for the fast subsystem: transient 20 tau, window 100 tau.
    pub fn for_fast(fp: &FastParams) -> Self {
        let t_discard = 20.0 * fp.tau;
        Self {
            h_max: Self::default_h_max(fp.tau),
            t_end: t_discard + 100.0 * fp.tau.max(1.0),
            t_discard,
            history: History::constant(0.0, fp.y),
        }
    }

    pub fn with_history(mut self, history: History) -> Self {
        self.history = history;
        self
    }

    pub fn with_times(mut self, t_end: f64, t_discard: f64) -> Self {
        self.t_end = t_end;
        self.t_discard = t_discard;
        self
    }

    pub fn with_h_max(mut self, h_max: f64) -> Self {
        self.h_max = h_max;
        self
    }

    /// Number of steps per delay interval, at least 4.
    pub fn steps_per_delay(&self, tau: f64) -> usize {
        ((tau / self.h_max).ceil() as usize).max(4)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h_max > 0.0 && self.h_max.is_finite()) {
            return Err(Error::InvalidConfig(format!("h_max must be positive, got {}", self.h_max)));
        }
        if !(self.t_end.is_finite() && self.t_discard >= 0.0 && self.t_discard < self.t_end) {
            return Err(Error::InvalidConfig(format!(
                "need 0 <= t_discard < t_end, got t_discard = {}, t_end = {}",
                self.t_discard, self.t_end
            )));
        }
        Ok(())
    }
}

/// Coordinate observed by an event.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Coordinate {
    X,
    Y,
    XDelayed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Up,
    Down,
    Both,
}

/// Level-crossing event.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventSpec {
    pub coordinate: Coordinate,
    pub level: f64,
    pub direction: Direction,
}

impl EventSpec {
    pub fn new(coordinate: Coordinate, level: f64, direction: Direction) -> Self {
        Self { coordinate, level, direction }
    }
}

/// Located crossing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Crossing {
    pub t: f64,
    pub state: State,
    pub x_delayed: f64,
}

#[inline]
fn hermite(y0: f64, d0: f64, y1: f64, d1: f64, h: f64, s: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * y0
        + (s3 - 2.0 * s2 + s) * h * d0
        + (3.0 * s2 - 2.0 * s3) * y1
        + (s3 - s2) * h * d1
}

#[inline]
fn hermite_state(a: State, da: State, b: State, db: State, h: f64, s: f64) -> State {
    State::new(hermite(a.x, da.x, b.x, db.x, h, s), hermite(a.y, da.y, b.y, db.y, h, s))
}

/// Stepper that owns the growing mesh. Exposed so that callers can interleave
/// stepping with edits of the recent window (used by divergence estimates).
pub struct Integrator<M: DelayModel> {
    model: M,
    h: f64,
    m: usize,
    hist: Vec<State>,
    hist_d: Vec<State>,
    states: Vec<State>,
    derivs: Vec<State>,
}

impl<M: DelayModel> Integrator<M> {
    pub fn new(model: M, h_max: f64, history: &History) -> Result<Self> {
        let tau = model.tau();
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidConfig(format!("tau must be positive, got {tau}")));
        }
        if !(h_max > 0.0 && h_max.is_finite()) {
            return Err(Error::InvalidConfig(format!("h_max must be positive, got {h_max}")));
        }
        let m = ((tau / h_max).ceil() as usize).max(4);
        let h = tau / m as f64;
        let mut hist = Vec::with_capacity(m + 1);
        let mut hist_d = Vec::with_capacity(m + 1);
        for j in 0..=m {
            let t = if j == m { 0.0 } else { -tau + j as f64 * h };
            let v = history.value(t);
            if !v.is_finite() {
                return Err(Error::InvalidConfig(format!("history is not finite at t = {t}")));
            }
            hist.push(v);
            hist_d.push(history.derivative(t, tau));
        }
        let s0 = hist[m];
        let d0 = model.rhs(s0, hist[0].x);
        Ok(Self { model, h, m, hist, hist_d, states: vec![s0], derivs: vec![d0] })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn steps_per_delay(&self) -> usize {
        self.m
    }

    /// Index of the last computed node.
    pub fn index(&self) -> usize {
        self.states.len() - 1
    }

    pub fn time(&self) -> f64 {
        self.index() as f64 * self.h
    }

    pub fn current(&self) -> State {
        *self.states.last().expect("mesh is never empty")
    }

    pub fn reserve(&mut self, extra: usize) {
        self.states.reserve(extra);
        self.derivs.reserve(extra);
    }

    #[inline]
    fn node(&self, k: isize) -> (State, State) {
        if k >= 0 {
            (self.states[k as usize], self.derivs[k as usize])
        } else {
            let j = (k + self.m as isize) as usize;
            (self.hist[j], self.hist_d[j])
        }
    }

    /// Advance one step.
    pub fn step(&mut self) -> Result<()> {
        let i = self.index();
        let h = self.h;
        let k = i as isize - self.m as isize;
        let (l, dl) = self.node(k);
        let (r, dr) = self.node(k + 1);
        let xd0 = l.x;
        let xd1 = r.x;
        let xdm = 0.5 * (xd0 + xd1) + h / 8.0 * (dl.x - dr.x);
        let s = self.states[i];
        let k1 = self.derivs[i];
        debug_assert_eq!(k1, self.model.rhs(s, xd0));
        let k2 = self.model.rhs(s.axpy(0.5 * h, k1), xdm);
        let k3 = self.model.rhs(s.axpy(0.5 * h, k2), xdm);
        let k4 = self.model.rhs(s.axpy(h, k3), xd1);
        let next = State::new(
            s.x + h / 6.0 * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x),
            s.y + h / 6.0 * (k1.y + 2.0 * k2.y + 2.0 * k3.y + k4.y),
        );
        if !next.is_finite() || next.x.abs() > BLOWUP_BOUND || next.y.abs() > BLOWUP_BOUND {
            return Err(Error::Blowup { t: (i + 1) as f64 * h });
        }
        let dnext = self.model.rhs(next, xd1);
        self.states.push(next);
        self.derivs.push(dnext);
        Ok(())
    }

    pub fn advance(&mut self, steps: usize) -> Result<()> {
        self.reserve(steps);
        for _ in 0..steps {
            self.step()?;
        }
        Ok(())
    }

    /// Advance until the mesh reaches time `t` (rounded up to a node).
    pub fn advance_to(&mut self, t: f64) -> Result<()> {
        let target = (t / self.h - 1e-9).ceil().max(0.0) as usize;
        if target > self.index() {
            self.advance(target - self.index())?;
        }
        Ok(())
    }

    /// Last `m + 1` nodes (one delay interval).
    pub fn window(&self) -> (&[State], &[State]) {
        let n = self.states.len();
        let lo = n.saturating_sub(self.m + 1);
        (&self.states[lo..], &self.derivs[lo..])
    }

    /// Mutable access to the last `m + 1` nodes and their derivatives.
    ///
    /// Callers that change states must keep derivatives consistent; the
    /// derivative of the newest node is recomputed from the model here.
    pub fn edit_window<F: FnOnce(&mut [State], &mut [State])>(&mut self, f: F) {
        let n = self.states.len();
        let lo = n.saturating_sub(self.m + 1);
        f(&mut self.states[lo..], &mut self.derivs[lo..]);
        let i = n - 1;
        let (l, _) = self.node(i as isize - self.m as isize);
        self.derivs[i] = self.model.rhs(self.states[i], l.x);
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    pub fn into_trajectory(self, t_discard: f64) -> Trajectory {
        Trajectory {
            tau: self.model.tau(),
            h: self.h,
            m: self.m,
            t_discard,
            hist: self.hist,
            hist_d: self.hist_d,
            states: self.states,
            derivs: self.derivs,
        }
    }
}

/// Integrate a model over [0, cfg.t_end].
pub fn integrate<M: DelayModel>(model: M, cfg: &SolverConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let mut it = Integrator::new(model, cfg.h_max, &cfg.history)?;
    it.advance_to(cfg.t_end)?;
    Ok(it.into_trajectory(cfg.t_discard))
}

/// Mesh solution with its history segment.
#[derive(Clone, Debug)]
pub struct Trajectory {
    tau: f64,
    h: f64,
    m: usize,
    t_discard: f64,
    hist: Vec<State>,
    hist_d: Vec<State>,
    states: Vec<State>,
    derivs: Vec<State>,
}

impl Trajectory {
    /// Assemble a trajectory from raw node data. `hist` covers [-tau, 0] with
    /// `m + 1` nodes and `states` starts at t = 0.
    pub fn from_parts(
        tau: f64,
        m: usize,
        t_discard: f64,
        hist: Vec<State>,
        hist_d: Vec<State>,
        states: Vec<State>,
        derivs: Vec<State>,
    ) -> Result<Self> {
        if m < 1 || hist.len() != m + 1 || hist_d.len() != m + 1 {
            return Err(Error::InvalidInput("history must hold m + 1 nodes".into()));
        }
        if states.is_empty() || states.len() != derivs.len() {
            return Err(Error::InvalidInput("states and derivatives must match".into()));
        }
        Ok(Self { tau, h: tau / m as f64, m, t_discard, hist, hist_d, states, derivs })
    }

    /// Image under (x, y) -> (-x, -y), which maps solutions at a to solutions at -a.
    pub fn reflected(&self) -> Self {
        let neg = |v: &[State]| v.iter().map(|s| s.scale(-1.0)).collect::<Vec<_>>();
        Self {
            tau: self.tau,
            h: self.h,
            m: self.m,
            t_discard: self.t_discard,
            hist: neg(&self.hist),
            hist_d: neg(&self.hist_d),
            states: neg(&self.states),
            derivs: neg(&self.derivs),
        }
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn steps_per_delay(&self) -> usize {
        self.m
    }

    pub fn t_discard(&self) -> f64 {
        self.t_discard
    }

    pub fn t_end(&self) -> f64 {
        (self.states.len() - 1) as f64 * self.h
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.h
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn derivs(&self) -> &[State] {
        &self.derivs
    }

    pub fn history(&self) -> &[State] {
        &self.hist
    }

    /// First node index at or after `t`.
    pub fn index_at(&self, t: f64) -> usize {
        ((t / self.h - 1e-9).ceil().max(0.0) as usize).min(self.states.len() - 1)
    }

    /// Node value and derivative for signed index k (negative indices address
    /// the history, k = -m is t = -tau).
    pub fn node(&self, k: isize) -> (State, State) {
        if k >= 0 {
            (self.states[k as usize], self.derivs[k as usize])
        } else {
            let j = (k + self.m as isize) as usize;
            (self.hist[j], self.hist_d[j])
        }
    }

    /// Delayed x at main node i.
    pub fn x_delayed_at(&self, i: usize) -> f64 {
        self.node(i as isize - self.m as isize).0.x
    }

    /// Cubic Hermite evaluation at time t in [-tau, T].
    pub fn dense_eval(&self, t: f64) -> Result<State> {
        let lo = -self.tau;
        let hi = self.t_end();
        let slack = 1e-12 * (1.0 + hi.abs());
        if !(t >= lo - slack && t <= hi + slack) {
            return Err(Error::OutOfRange { t, lo, hi });
        }
        let r = t / self.h;
        let nearest = r.round();
        if (r - nearest).abs() < 1e-9 {
            let k = (nearest as isize).clamp(-(self.m as isize), self.states.len() as isize - 1);
            if k == 0 {
                return Ok(self.states[0]);
            }
            return Ok(self.node(k).0);
        }
        let n_main = self.states.len() as isize - 1;
        let mut k = r.floor() as isize;
        k = k.clamp(-(self.m as isize), (n_main - 1).max(-1));
        let s = r - k as f64;
        let (a, da, b, db) = if k >= 0 {
            let (a, da) = self.node(k);
            let (b, db) = self.node(k + 1);
            (a, da, b, db)
        } else {
            let j = (k + self.m as isize) as usize;
            (self.hist[j], self.hist_d[j], self.hist[j + 1], self.hist_d[j + 1])
        };
        Ok(hermite_state(a, da, b, db, self.h, s))
    }

    fn coord_on_interval(&self, coord: Coordinate, i: usize, s: f64) -> f64 {
        let h = self.h;
        match coord {
            Coordinate::X | Coordinate::Y => {
                let (a, da) = self.node(i as isize);
                let (b, db) = self.node(i as isize + 1);
                let v = hermite_state(a, da, b, db, h, s);
                if coord == Coordinate::X {
                    v.x
                } else {
                    v.y
                }
            }
            Coordinate::XDelayed => {
                let k = i as isize - self.m as isize;
                let (a, da) = self.node(k);
                let (b, db) = self.node(k + 1);
                hermite(a.x, da.x, b.x, db.x, h, s)
            }
        }
    }

    /// Level crossings after the transient, located on the Hermite interpolant.
    pub fn detect_crossings(&self, ev: &EventSpec) -> Vec<Crossing> {
        let mut out = Vec::new();
        if !ev.level.is_finite() || self.states.len() < 2 {
            return out;
        }
        let start = ((self.t_discard / self.h).floor() as usize).min(self.states.len() - 1);
        let coord_at = |i: usize| -> f64 {
            match ev.coordinate {
                Coordinate::X => self.states[i].x,
                Coordinate::Y => self.states[i].y,
                Coordinate::XDelayed => self.x_delayed_at(i),
            }
        };
        let mut g0 = coord_at(start) - ev.level;
        for i in start..self.states.len() - 1 {
            let g1 = coord_at(i + 1) - ev.level;
            let hit = match ev.direction {
                Direction::Up => g0 < 0.0 && g1 >= 0.0,
                Direction::Down => g0 > 0.0 && g1 <= 0.0,
                Direction::Both => (g0 < 0.0 && g1 >= 0.0) || (g0 > 0.0 && g1 <= 0.0),
            };
            if hit {
                let s = self.solve_on_interval(ev, i, g0, g1);
                let t = (i as f64 + s) * self.h;
                if t >= self.t_discard {
                    let state = self.dense_eval(t).expect("crossing inside mesh");
                    let x_delayed = self.dense_eval(t - self.tau).expect("delay inside mesh").x;
                    out.push(Crossing { t, state, x_delayed });
                }
            }
            g0 = g1;
        }
        out
    }

    /// Illinois regula falsi on the local parameter s in [0, 1].
    fn solve_on_interval(&self, ev: &EventSpec, i: usize, g0: f64, g1: f64) -> f64 {
        if g1 == 0.0 {
            return 1.0;
        }
        let f = |s: f64| self.coord_on_interval(ev.coordinate, i, s) - ev.level;
        let (mut a, mut fa, mut b, mut fb) = (0.0, g0, 1.0, g1);
        // Far tighter than 1e-10 relative in t for any practical mesh.
        let tol = 1e-13;
        let mut side = 0i8;
        for _ in 0..200 {
            let c = (a * fb - b * fa) / (fb - fa);
            let fc = f(c);
            if fc == 0.0 || (b - a).abs() < tol {
                return c;
            }
            if fc.signum() == fb.signum() {
                b = c;
                fb = fc;
                if side == -1 {
                    fa *= 0.5;
                }
                side = -1;
            } else {
                a = c;
                fa = fc;
                if side == 1 {
                    fb *= 0.5;
                }
                side = 1;
            }
            if (b - a).abs() < 1e-15 {
                return 0.5 * (a + b);
            }
        }
        0.5 * (a + b)
    }

    /// Write the main mesh (t >= 0) as CSV with header `t,x,y,x_delayed`.
    pub fn write_csv<W: Write>(&self, w: W, stride: usize) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "x", "y", "x_delayed"])?;
        let stride = stride.max(1);
        for i in (0..self.states.len()).step_by(stride) {
            let s = self.states[i];
            wr.write_record([
                fmt17(self.time(i)),
                fmt17(s.x),
                fmt17(s.y),
                fmt17(self.x_delayed_at(i)),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Decimal with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

//! Vector fields of the self-coupled delayed FitzHugh-Nagumo system.
//!
//! The full system reads
//!
//! ```text
//! x' = x - x^3/3 + y + J (x(t) - x(t - tau))
//! y' = eps (a + b x + gamma y)
//! ```
//!
//! with `b = -1` and `gamma = 0` by default. The fast subsystem freezes `y`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the full system.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Coupling strength J.
    pub j: f64,
    /// Input parameter; the equilibrium sits at x = a when gamma = 0.
    pub a: f64,
    /// Timescale ratio.
    pub epsilon: f64,
    /// Delay.
    pub tau: f64,
    /// Leak of the slow variable.
    pub gamma: f64,
    /// Coupling of x into the slow equation.
    pub b: f64,
}

impl SystemParams {
    pub fn new(j: f64, a: f64, epsilon: f64, tau: f64) -> Self {
        Self { j, a, epsilon, tau, gamma: 0.0, b: -1.0 }
    }

    pub fn with_slow_terms(mut self, gamma: f64, b: f64) -> Self {
        self.gamma = gamma;
        self.b = b;
        self
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn with_a(mut self, a: f64) -> Self {
        self.a = a;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.j, self.a, self.epsilon, self.tau, self.gamma, self.b];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite parameter in {self:?}")));
        }
        if self.tau <= 0.0 {
            return Err(Error::InvalidInput(format!("tau must be positive, got {}", self.tau)));
        }
        if self.epsilon < 0.0 {
            return Err(Error::InvalidInput(format!(
                "epsilon must be non-negative, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    /// True for the main-text system (gamma = 0, b = -1).
    pub fn is_standard(&self) -> bool {
        self.gamma == 0.0 && self.b == -1.0
    }

    /// Equilibrium of the standard system: (a, a^3/3 - a).
    pub fn standard_equilibrium(&self) -> State {
        State::new(self.a, self.a.powi(3) / 3.0 - self.a)
    }

    /// Fast subsystem with `y` frozen.
    pub fn fast(&self, y: f64) -> FastParams {
        FastParams { j: self.j, tau: self.tau, y }
    }
}

/// Parameters of the fast subsystem.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FastParams {
    pub j: f64,
    pub tau: f64,
    /// Frozen slow variable.
    pub y: f64,
}

impl FastParams {
    pub fn new(j: f64, tau: f64, y: f64) -> Self {
        Self { j, tau, y }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.j.is_finite() && self.tau.is_finite() && self.y.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite parameter in {self:?}")));
        }
        if self.tau <= 0.0 {
            return Err(Error::InvalidInput(format!("tau must be positive, got {}", self.tau)));
        }
        Ok(())
    }
}

/// Phase-space point (x, y).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub x: f64,
    pub y: f64,
}

impl State {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn scale(self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s)
    }

    pub fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }

    pub fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }

    /// `self + s * o`
    pub fn axpy(self, s: f64, o: Self) -> Self {
        Self::new(self.x + s * o.x, self.y + s * o.y)
    }
}

#[inline]
fn cubic_part(x: f64) -> f64 {
    x - x * x * x / 3.0
}

/// Right-hand side of the full (generalized) system.
#[inline]
pub fn rhs(now: State, x_delayed: f64, p: &SystemParams) -> State {
    State {
        x: cubic_part(now.x) + now.y + p.j * (now.x - x_delayed),
        y: p.epsilon * (p.a + p.b * now.x + p.gamma * now.y),
    }
}

/// Checked right-hand side of the full system.
pub fn full_rhs(now: State, x_delayed: f64, p: &SystemParams) -> Result<State> {
    if !now.is_finite() || !x_delayed.is_finite() {
        return Err(Error::InvalidInput(format!(
            "non-finite state {now:?} or delayed value {x_delayed}"
        )));
    }
    Ok(rhs(now, x_delayed, p))
}

/// Right-hand side of the fast subsystem (no finiteness check).
#[inline]
pub fn fast_rhs_unchecked(x_now: f64, x_delayed: f64, fp: &FastParams) -> f64 {
    cubic_part(x_now) + fp.y + fp.j * (x_now - x_delayed)
}

/// Checked right-hand side of the fast subsystem.
pub fn fast_rhs(x_now: f64, x_delayed: f64, fp: &FastParams) -> Result<f64> {
    if !x_now.is_finite() || !x_delayed.is_finite() {
        return Err(Error::InvalidInput(format!(
            "non-finite values x = {x_now}, x_delayed = {x_delayed}"
        )));
    }
    Ok(fast_rhs_unchecked(x_now, x_delayed, fp))
}

/// A delay system with a single constant delay acting on x.
pub trait DelayModel: Send + Sync {
    fn name(&self) -> &'static str;
    fn tau(&self) -> f64;
    fn rhs(&self, now: State, x_delayed: f64) -> State;
}

impl<M: DelayModel + ?Sized> DelayModel for Box<M> {
    fn name(&self) -> &'static str {
        (**self).name()
    }
    fn tau(&self) -> f64 {
        (**self).tau()
    }
    fn rhs(&self, now: State, x_delayed: f64) -> State {
        (**self).rhs(now, x_delayed)
    }
}

impl<M: DelayModel + ?Sized> DelayModel for &M {
    fn name(&self) -> &'static str {
        (**self).name()
    }
    fn tau(&self) -> f64 {
        (**self).tau()
    }
    fn rhs(&self, now: State, x_delayed: f64) -> State {
        (**self).rhs(now, x_delayed)
    }
}

/// Full system, including the leak and slow-coupling terms.
#[derive(Clone, Copy, Debug)]
pub struct FullModel(pub SystemParams);

impl DelayModel for FullModel {
    fn name(&self) -> &'static str {
        "full"
    }
    fn tau(&self) -> f64 {
        self.0.tau
    }
    #[inline]
    fn rhs(&self, now: State, x_delayed: f64) -> State {
        rhs(now, x_delayed, &self.0)
    }
}

/// Fast subsystem. The y component is carried along unchanged.
#[derive(Clone, Copy, Debug)]
pub struct FastModel(pub FastParams);

impl DelayModel for FastModel {
    fn name(&self) -> &'static str {
        "fast"
    }
    fn tau(&self) -> f64 {
        self.0.tau
    }
    #[inline]
    fn rhs(&self, now: State, x_delayed: f64) -> State {
        State::new(fast_rhs_unchecked(now.x, x_delayed, &self.0), 0.0)
    }
}

/// Inputs from which a registered model is built.
#[derive(Clone, Copy, Debug)]
pub struct ModelInputs {
    pub params: SystemParams,
    /// Frozen slow variable, required by the fast subsystem.
    pub frozen_y: Option<f64>,
}

type Builder = fn(&ModelInputs) -> Result<Box<dyn DelayModel>>;

/// Models selectable by name at runtime.
pub struct ModelRegistry {
    builders: BTreeMap<&'static str, Builder>,
}

impl fmt::Debug for ModelRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.builders.keys()).finish()
    }
}

impl Default for ModelRegistry {
    fn default() -> Self {
        let mut reg = Self { builders: BTreeMap::new() };
        reg.register("full", build_full);
        reg.register("general", build_general);
        reg.register("fast", build_fast);
        reg
    }
}

fn build_full(inp: &ModelInputs) -> Result<Box<dyn DelayModel>> {
    let p = inp.params;
    p.validate()?;
    if !p.is_standard() {
        return Err(Error::InvalidInput(
            "model 'full' uses gamma = 0 and b = -1; use 'general' for other values".into(),
        ));
    }
    Ok(Box::new(FullModel(p)))
}

fn build_general(inp: &ModelInputs) -> Result<Box<dyn DelayModel>> {
    inp.params.validate()?;
    Ok(Box::new(FullModel(inp.params)))
}

fn build_fast(inp: &ModelInputs) -> Result<Box<dyn DelayModel>> {
    let y = inp
        .frozen_y
        .ok_or_else(|| Error::InvalidInput("model 'fast' needs a frozen y value".into()))?;
    let fp = inp.params.fast(y);
    fp.validate()?;
    Ok(Box::new(FastModel(fp)))
}

impl ModelRegistry {
    pub fn register(&mut self, name: &'static str, builder: Builder) {
        self.builders.insert(name, builder);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.builders.keys().copied().collect()
    }

    pub fn build(&self, name: &str, inputs: &ModelInputs) -> Result<Box<dyn DelayModel>> {
        let b = self.builders.get(name).ok_or_else(|| {
            Error::InvalidInput(format!("unknown model '{name}' (known: {:?})", self.names()))
        })?;
        b(inputs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn fixed_point_is_stationary() {
        let p = SystemParams::new(2.0, 1.3, 0.05, 1.0);
        let e = p.standard_equilibrium();
        let d = full_rhs(e, e.x, &p).unwrap();
        assert!(d.x.abs() < 1e-15 && d.y.abs() < 1e-15);
    }

    #[test]
    fn hand_values() {
        let p = SystemParams::new(2.0, 1.01, 0.05, 1.0);
        let d = full_rhs(State::new(0.0, 0.0), 0.0, &p).unwrap();
        assert_eq!(d.x, 0.0);
        assert_relative_eq!(d.y, 0.0505, epsilon = 1e-15);
        let d = full_rhs(State::new(1.0, 0.0), 0.0, &p).unwrap();
        assert_relative_eq!(d.x, 8.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(d.y, 0.0005, epsilon = 1e-15);

        let fp = FastParams::new(2.0, 1.0, 2.0 / 3.0);
        assert_relative_eq!(fast_rhs(2.0, 2.0, &fp).unwrap(), 0.0, epsilon = 1e-15);
        let fp = FastParams::new(2.0, 1.0, 0.0);
        assert_eq!(fast_rhs(0.0, 1.0, &fp).unwrap(), -2.0);
    }

    #[test]
    fn non_finite_rejected() {
        let p = SystemParams::new(2.0, 1.0, 0.05, 1.0);
        assert!(full_rhs(State::new(f64::NAN, 0.0), 0.0, &p).is_err());
        assert!(fast_rhs(0.0, f64::INFINITY, &p.fast(0.0)).is_err());
    }

    #[test]
    fn registry_builds_by_name() {
        let reg = ModelRegistry::default();
        assert_eq!(reg.names(), vec!["fast", "full", "general"]);
        let inp = ModelInputs { params: SystemParams::new(2.0, 1.0, 0.1, 0.5), frozen_y: Some(0.2) };
        let m = reg.build("fast", &inp).unwrap();
        assert_eq!(m.name(), "fast");
        assert_eq!(m.rhs(State::new(0.0, 9.0), 0.0).y, 0.0);
        assert!(reg.build("nope", &inp).is_err());
        let bad = ModelInputs { params: inp.params.with_slow_terms(0.3, -1.0), frozen_y: None };
        assert!(reg.build("full", &bad).is_err());
        assert!(reg.build("general", &bad).is_ok());
    }
}

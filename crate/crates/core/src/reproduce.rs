//! Canned desk-scale reproductions. Each scenario writes CSV files with
//! plotting scripts into an output folder and returns a table of checks.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Serialize;

use crate::atlas::{
    augmented_manifold, classify, classify_trajectory, detect_period, divergence_rate, gnuplot_script,
    poincare_sequence, predict_regime, ClassifierConfig, PlotKind, PredictedRegime, RegimeLabel,
};
use crate::bifurcation::{
    bautin_locate, chebyshev_gauss, chebyshev_lobatto, fast_hopf_curve, full_curve_continuity_check,
    full_hopf_curves, homoclinic_approx_curve, tau_fast_hopf, tau_full_hopf, write_curves_csv, BifurcationCurve,
    CurveLabel, CurveMeta, CurveSample,
};
use crate::error::{Error, Result};
use crate::manifold::{critical_roots, Multiplicity, Y_FOLD};
use crate::model::{FullModel, SystemParams};
use crate::normal_form::{bt_local_check, criticality_probe, lyap1_fast, ProbeOutcome, ProbeTarget, PROBE_DELTA_TAU};
use crate::solver::{fmt17, integrate, Coordinate, Direction, EventSpec, History, SolverConfig};
use crate::spectrum::{char_fn_fast, char_fn_fast_deriv, char_fn_full, char_fn_full_deriv, newton};

/// One row of a reproduction table.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    /// Acceptance criterion number this row speaks to.
    pub criterion: u32,
    pub name: String,
    pub value: String,
    pub target: String,
    pub pass: bool,
}

impl Check {
    fn new(criterion: u32, name: impl Into<String>, value: impl Into<String>, target: impl Into<String>, pass: bool) -> Self {
        Self { criterion, name: name.into(), value: value.into(), target: target.into(), pass }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ScenarioOutput {
    pub id: String,
    pub checks: Vec<Check>,
    /// Data files written (CSV), each with a plotting script next to it.
    pub files: Vec<PathBuf>,
    pub scripts: Vec<PathBuf>,
}

impl ScenarioOutput {
    fn new(id: &str) -> Self {
        Self { id: id.to_string(), checks: Vec::new(), files: Vec::new(), scripts: Vec::new() }
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// Fixed-width table with one PASS/FAIL row per check.
    pub fn table(&self) -> String {
        let mut s = format!("{:<5} {:<4} {:<58} {:<30} {}\n", "crit", "ok", "check", "value", "target");
        for c in &self.checks {
            s.push_str(&format!(
                "{:<5} {:<4} {:<58} {:<30} {}\n",
                c.criterion,
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.value,
                c.target
            ));
        }
        s
    }

    fn write_data<F>(&mut self, dir: &Path, name: &str, f: F) -> Result<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<()>,
    {
        let path = dir.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        f(&mut w)?;
        w.flush()?;
        self.files.push(path);
        Ok(())
    }

    fn write_script(&mut self, dir: &Path, csv: &str, title: &str, xl: &str, yl: &str, kind: PlotKind) -> Result<()> {
        let path = dir.join(format!("{}.gp", csv.trim_end_matches(".csv")));
        std::fs::write(&path, gnuplot_script(csv, title, xl, yl, &kind))?;
        self.scripts.push(path);
        Ok(())
    }
}

/// A reproducible scenario addressed by a figure id.
pub trait Scenario: Send + Sync {
    fn id(&self) -> &'static str;
    fn description(&self) -> &'static str;
    fn run(&self, out_dir: &Path) -> Result<ScenarioOutput>;
}

/// Registry of scenarios, looked up by id.
pub struct ScenarioRegistry {
    items: Vec<Box<dyn Scenario>>,
}

impl Default for ScenarioRegistry {
    fn default() -> Self {
        let mut r = Self { items: Vec::new() };
        r.register(Box::new(HopfCurves));
        r.register(Box::new(Regimes));
        r.register(Box::new(PoincareChaos));
        r.register(Box::new(FastDiagram));
        r.register(Box::new(FastLyapunov));
        r.register(Box::new(AveragedManifold));
        r
    }
}

impl ScenarioRegistry {
    pub fn register(&mut self, s: Box<dyn Scenario>) {
        self.items.retain(|x| x.id() != s.id());
        self.items.push(s);
    }

    pub fn ids(&self) -> Vec<&'static str> {
        self.items.iter().map(|s| s.id()).collect()
    }

    pub fn get(&self, id: &str) -> Result<&dyn Scenario> {
        self.items
            .iter()
            .find(|s| s.id() == id)
            .map(|s| s.as_ref())
            .ok_or_else(|| Error::InvalidInput(format!("unknown scenario '{id}', expected one of {:?}", self.ids())))
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn Scenario> {
        self.items.iter().map(|s| s.as_ref())
    }
}

fn sci(v: f64) -> String {
    format!("{v:.3e}")
}

const J: f64 = 2.0;

/// Hopf curves of the full system with the fast curves superimposed.
struct HopfCurves;

impl Scenario for HopfCurves {
    fn id(&self) -> &'static str {
        "fig1"
    }

    fn description(&self) -> &'static str {
        "Hopf curves in (a, tau): eps = 0.01 with fast curves, eps = 2 branches k = 0..3, Bautin point"
    }

    fn run(&self, dir: &Path) -> Result<ScenarioOutput> {
        let mut out = ScenarioOutput::new(self.id());
        let n = 256;
        let eps = 0.01;
        let (t1, t2) = full_hopf_curves(J, eps, 0, n)?;
        // Fast curve in (a, tau) with a = x*.
        let fast = fast_hopf_curve(J, 0, n)?;
        let fast_a = BifurcationCurve {
            label: CurveLabel::HopfFast,
            k: Some(0),
            samples: fast.samples.iter().filter(|s| s.param > 0.0).copied().collect(),
        };
        let meta = CurveMeta { j: J, epsilon: Some(eps), grid: n };
        out.write_data(dir, "fig1_hopf_eps0.01.csv", |w| write_curves_csv(w, &meta, &[t1, t2, fast_a]))?;
        out.write_script(
            dir,
            "fig1_hopf_eps0.01.csv",
            "Hopf curves, J = 2, eps = 0.01",
            "a",
            "tau",
            PlotKind::Lines { x: 2, y: 3, group: Some(0) },
        )?;

        let mut curves = Vec::new();
        for k in 0..=3 {
            let (a, b) = full_hopf_curves(J, 2.0, k, n)?;
            curves.push(a);
            curves.push(b);
        }
        let meta = CurveMeta { j: J, epsilon: Some(2.0), grid: n };
        out.write_data(dir, "fig1_hopf_eps2.csv", |w| write_curves_csv(w, &meta, &curves))?;
        out.write_script(
            dir,
            "fig1_hopf_eps2.csv",
            "Hopf branches k = 0..3, J = 2, eps = 2",
            "a",
            "tau",
            PlotKind::Lines { x: 2, y: 3, group: None },
        )?;

        // Closed form against polished characteristic roots.
        let top = (1.0 + 2.0 * J).sqrt();
        let mut worst: f64 = 0.0;
        for a in chebyshev_gauss(1.0, top, 20) {
            let hp = tau_full_hopf(a, J, eps, 0)?;
            let f = |z: Complex64| (char_fn_full(z, a, J, hp.tau1, eps), char_fn_full_deriv(z, a, J, hp.tau1));
            let root = newton(f, Complex64::new(0.0, hp.zeta1.abs()), 50)
                .ok_or_else(|| Error::NoConvergence("Newton on the full characteristic function".into()))?;
            worst = worst.max(root.re.abs());
        }
        out.checks.push(Check::new(1, "max |Re xi| at tau_1^0(a), 20 points", sci(worst), "< 1e-6", worst < 1e-6));
        let mut worst_f: f64 = 0.0;
        for x in chebyshev_gauss(1.0, top, 20) {
            let hp = tau_fast_hopf(x, J, 0)?;
            let f = |z: Complex64| (char_fn_fast(z, x, J, hp.tau), char_fn_fast_deriv(z, J, hp.tau));
            let root = newton(f, Complex64::new(0.0, hp.zeta), 50)
                .ok_or_else(|| Error::NoConvergence("Newton on the fast characteristic function".into()))?;
            worst_f = worst_f.max(root.re.abs());
        }
        out.checks.push(Check::new(1, "max |Re xi| at tau_f^0(x), 20 points", sci(worst_f), "< 1e-6", worst_f < 1e-6));

        let left = tau_full_hopf(1.0, J, eps, 0)?.tau1;
        let right = tau_full_hopf(top, J, eps, 0)?.tau1;
        let right_err = (right - std::f64::consts::PI / eps.sqrt()).abs();
        out.checks.push(Check::new(4, "tau_1^0 at a = 1", sci(left), "0 within 1e-10", left.abs() < 1e-10));
        out.checks.push(Check::new(
            4,
            "tau_1^0 at a = sqrt(1+2J) minus pi/sqrt(eps)",
            sci(right_err),
            "< 1e-10",
            right_err < 1e-10,
        ));
        for k in 0..=3 {
            let c = full_curve_continuity_check(J, 2.0, k)?;
            out.checks.push(Check::new(
                4,
                format!("eps = 2: |tau_2^{k} - tau_1^{}| at a = 1", k + 1),
                sci(c.left_gap),
                "< 1e-10",
                c.left_gap < 1e-10,
            ));
        }

        let b = bautin_locate(J, eps, 1e-6)?;
        out.checks.push(Check::new(
            6,
            "Bautin tau_s at eps = 0.01",
            format!("{:.4} (a = {:.4})", b.tau_s, b.a),
            "in [0.45, 0.55]",
            (0.45..=0.55).contains(&b.tau_s),
        ));
        // Probe away from the degenerate point, where l1 is not small.
        let gap = top - b.a;
        let (a_lo, a_hi) = (b.a - 0.5 * gap, b.a + 0.3 * gap);
        let l_lo = crate::normal_form::lyap1_full(J, eps, a_lo)?.ell1;
        let l_hi = crate::normal_form::lyap1_full(J, eps, a_hi)?.ell1;
        let lo = criticality_probe(ProbeTarget::Full { j: J, epsilon: eps, a: a_lo }, PROBE_DELTA_TAU)?;
        let hi = criticality_probe(ProbeTarget::Full { j: J, epsilon: eps, a: a_hi }, PROBE_DELTA_TAU)?;
        let agree = |o: ProbeOutcome, ell: f64| match o {
            ProbeOutcome::Supercritical => ell < 0.0,
            ProbeOutcome::Subcritical => ell > 0.0,
            ProbeOutcome::Inconclusive => false,
        };
        out.checks.push(Check::new(
            6,
            "probes on both sides of the Bautin point",
            format!("{:?} / {:?}", lo.outcome, hi.outcome),
            "matches sign of l1",
            agree(lo.outcome, l_lo) && agree(hi.outcome, l_hi) && l_lo * l_hi < 0.0,
        ));
        Ok(out)
    }
}

const FIG2_TAUS: [(f64, RegimeLabel); 4] = [
    (0.40, RegimeLabel::SmallCycle),
    (0.55, RegimeLabel::Mmo),
    (0.70, RegimeLabel::Chaotic),
    (1.00, RegimeLabel::Bursting),
];

/// Regime sequence of the full system at a = 1.01, eps = 0.05.
struct Regimes;

impl Scenario for Regimes {
    fn id(&self) -> &'static str {
        "fig2"
    }

    fn description(&self) -> &'static str {
        "Full-system trajectories at J = 2, eps = 0.05, a = 1.01 for tau = 0.40, 0.55, 0.70, 1.00 with regime labels"
    }

    fn run(&self, dir: &Path) -> Result<ScenarioOutput> {
        let mut out = ScenarioOutput::new(self.id());
        let cc = ClassifierConfig::default();
        for (tau, expected) in FIG2_TAUS {
            let p = SystemParams::new(J, 1.01, 0.05, tau);
            let cfg = SolverConfig::for_full(&p);
            let tr = integrate(FullModel(p), &cfg)?;
            let c = classify_trajectory(&tr, &cc, || divergence_rate(&p, &cfg))?;
            let name = format!("fig2_tau{tau:.2}.csv");
            out.write_data(dir, &name, |w| tr.write_csv(w, 10))?;
            out.write_script(dir, &name, &format!("tau = {tau:.2}: {}", c.label), "t", "x", PlotKind::Lines {
                x: 0,
                y: 1,
                group: None,
            })?;
            out.checks.push(Check::new(
                7,
                format!("label at tau = {tau:.2}"),
                format!(
                    "{}{}",
                    c.label,
                    c.stats.divergence_rate.map(|l| format!(" (lambda {l:.4})")).unwrap_or_default()
                ),
                expected.as_str(),
                c.label == expected,
            ));
        }
        Ok(out)
    }
}

/// Poincare sequence of x(t - tau) on y = -0.4 at tau = 0.7.
struct PoincareChaos;

impl Scenario for PoincareChaos {
    fn id(&self) -> &'static str {
        "fig3"
    }

    fn description(&self) -> &'static str {
        "Poincare sequence x(t_n - tau) on y = -0.4 at J = 2, eps = 0.05, a = 1.01, tau = 0.7"
    }

    fn run(&self, dir: &Path) -> Result<ScenarioOutput> {
        let mut out = ScenarioOutput::new(self.id());
        let p = SystemParams::new(J, 1.01, 0.05, 0.7);
        let cfg = SolverConfig::for_full(&p);
        let t_end = cfg.t_discard + 4.0 * (cfg.t_end - cfg.t_discard);
        let cfg = cfg.with_times(t_end, SolverConfig::for_full(&p).t_discard);
        let tr = integrate(FullModel(p), &cfg)?;
        let seq = poincare_sequence(&tr, -0.4)?;
        out.write_data(dir, "fig3_poincare.csv", |w| {
            writeln!(w, "n,x_delayed")?;
            for (i, v) in seq.iter().enumerate() {
                writeln!(w, "{i},{}", fmt17(*v))?;
            }
            Ok(())
        })?;
        out.write_script(dir, "fig3_poincare.csv", "Poincare section y = -0.4", "n", "x(t_n - tau)", PlotKind::Points {
            x: 0,
            y: 1,
        })?;
        let crossings = tr.detect_crossings(&EventSpec::new(Coordinate::Y, -0.4, Direction::Up));
        let pts: Vec<(f64, f64)> = crossings.iter().map(|c| (c.state.x, c.x_delayed)).collect();
        let start = tr.index_at(tr.t_discard());
        let (lo, hi) = tr.states()[start..].iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), s| (l.min(s.x), h.max(s.x)));
        let period = detect_period(&pts, 32, 1e-3 * (hi - lo));
        out.checks.push(Check::new(
            7,
            "Poincare period at tau = 0.70",
            period.map_or("none <= 32".to_string(), |p| p.to_string()),
            "none <= 32",
            period.is_none(),
        ));
        let lam = divergence_rate(&p, &SolverConfig::for_full(&p))?;
        out.checks.push(Check::new(7, "divergence rate at tau = 0.70", format!("{lam:.4}"), "> 0.01", lam > 0.01));
        Ok(out)
    }
}

/// Fast-system diagram in (y, tau): saddle-node lines, Hopf curves, BT points
/// and the local homoclinic approximation.
struct FastDiagram;

impl Scenario for FastDiagram {
    fn id(&self) -> &'static str {
        "fig4"
    }

    fn description(&self) -> &'static str {
        "Fast-system bifurcations in (y, tau) at J = 2: SN lines, tau_f^k for k = 0..2, BT points, homoclinic approximation"
    }

    fn run(&self, dir: &Path) -> Result<ScenarioOutput> {
        let mut out = ScenarioOutput::new(self.id());
        let n = 256;
        let mut curves = Vec::new();
        for k in 0..=2 {
            curves.push(fast_hopf_curve(J, k, n)?);
        }
        let taus = chebyshev_lobatto(0.0, 3.0, 16);
        for y in [Y_FOLD, -Y_FOLD] {
            curves.push(BifurcationCurve {
                label: CurveLabel::SaddleNode,
                k: None,
                samples: taus.iter().map(|&t| CurveSample { param: t, tau: t, y: Some(y) }).collect(),
            });
        }
        curves.push(BifurcationCurve {
            label: CurveLabel::BogdanovTakens,
            k: None,
            samples: [Y_FOLD, -Y_FOLD].iter().map(|&y| CurveSample { param: 1.0 / J, tau: 1.0 / J, y: Some(y) }).collect(),
        });
        curves.push(homoclinic_approx_curve(J, 0.15, 32)?);
        let meta = CurveMeta { j: J, epsilon: None, grid: n };
        out.write_data(dir, "fig4_fast_diagram.csv", |w| write_curves_csv(w, &meta, &curves))?;
        out.write_script(dir, "fig4_fast_diagram.csv", "Fast system, J = 2", "y", "tau", PlotKind::Lines {
            x: 4,
            y: 3,
            group: Some(0),
        })?;

        for y in [Y_FOLD, -Y_FOLD] {
            let r = critical_roots(y);
            let doubles = r.iter().filter(|c| c.multiplicity == Multiplicity::Double).count();
            out.checks.push(Check::new(
                3,
                format!("critical roots at y = {y:+.4}"),
                format!("{} roots, {} double", r.len(), doubles),
                "2 roots, 1 double",
                r.len() == 2 && doubles == 1,
            ));
        }
        let bt = bt_local_check(J)?;
        out.checks.push(Check::new(
            3,
            "F(0), F'(0) at x* = 1, J tau = 1",
            format!("{:.1e}, {:.1e}", bt.f0, bt.f1),
            "0 to round-off",
            bt.f0.abs() < 1e-14 && bt.f1.abs() < 1e-14,
        ));
        let rel = (bt.sqrt_coefficient / bt.sqrt_coefficient_expected - 1.0).abs();
        out.checks.push(Check::new(
            3,
            "square-root coefficient of tau_f^0 at BT",
            format!("{:.5}", bt.sqrt_coefficient),
            format!("{:.5} within 5%", bt.sqrt_coefficient_expected),
            rel < 0.05,
        ));
        Ok(out)
    }
}

/// First Lyapunov coefficient along the fast Hopf curve.
struct FastLyapunov;

impl Scenario for FastLyapunov {
    fn id(&self) -> &'static str {
        "fig5"
    }

    fn description(&self) -> &'static str {
        "First Lyapunov coefficient along tau_f^0 at J = 2 as a function of y"
    }

    fn run(&self, dir: &Path) -> Result<ScenarioOutput> {
        let mut out = ScenarioOutput::new(self.id());
        let y_end = Y_FOLD * (1.0 + 2.0 * J).sqrt() * (J - 1.0);
        let ys = chebyshev_gauss(-y_end, y_end, 64);
        let mut rows = Vec::new();
        for &y in &ys {
            if let Ok(l) = lyap1_fast(J, y) {
                rows.push((y, l.tau, l.ell1));
            }
        }
        out.write_data(dir, "fig5_fast_lyapunov.csv", |w| {
            writeln!(w, "y,tau,ell1")?;
            for (y, t, l) in &rows {
                writeln!(w, "{},{},{}", fmt17(*y), fmt17(*t), fmt17(*l))?;
            }
            Ok(())
        })?;
        out.write_script(dir, "fig5_fast_lyapunov.csv", "l1 along tau_f^0, J = 2", "y", "l1", PlotKind::Lines {
            x: 0,
            y: 2,
            group: None,
        })?;
        for y in [-1.2, -1.0, -0.8] {
            let l = lyap1_fast(J, y)?;
            out.checks.push(Check::new(5, format!("fast l1 at y = {y}"), format!("{:.4}", l.ell1), "> 0", l.ell1 > 0.0));
        }
        let positive = rows.iter().filter(|r| r.2 > 0.0).count();
        out.checks.push(Check::new(
            5,
            "fast l1 positive along the sampled curve",
            format!("{positive}/{}", rows.len()),
            "all",
            positive == rows.len() && !rows.is_empty(),
        ));
        Ok(out)
    }
}

/// Augmented slow manifold at tau = 1 and the regime predictions it implies.
struct AveragedManifold;

impl Scenario for AveragedManifold {
    fn id(&self) -> &'static str {
        "fig7"
    }

    fn description(&self) -> &'static str {
        "Critical manifold and cycle averages at J = 2, tau = 1; predicted vs simulated regimes at a = 0 and a = 1.1"
    }

    fn run(&self, dir: &Path) -> Result<ScenarioOutput> {
        let mut out = ScenarioOutput::new(self.id());
        let tau = 1.0;
        let grid = chebyshev_lobatto(-2.0, 2.0, 81);
        let man = augmented_manifold(J, tau, &grid)?;
        out.write_data(dir, "fig7_manifold.csv", |w| man.write_csv(w))?;
        out.write_script(dir, "fig7_manifold.csv", "Augmented slow manifold, J = 2, tau = 1", "y", "x", PlotKind::Lines {
            x: 0,
            y: 3,
            group: Some(1),
        })?;
        let cc = ClassifierConfig::default();
        for (a, eps, expected) in [(0.0, 0.01, PredictedRegime::FastSpiking), (1.1, 0.02, PredictedRegime::Bursting)] {
            let pred = predict_regime(&man, a)?;
            let p = SystemParams::new(J, a, eps, tau);
            let cfg = SolverConfig::for_full(&p).with_history(History::constant(0.5, 0.0));
            let c = classify(&p, &cfg, &cc)?;
            let agree = matches!(
                (pred, c.label),
                (PredictedRegime::FastSpiking, RegimeLabel::FastSpiking)
                    | (PredictedRegime::Bursting, RegimeLabel::Bursting)
                    | (PredictedRegime::Stationary, RegimeLabel::Stationary)
            );
            out.checks.push(Check::new(
                12,
                format!("prediction vs classification at a = {a}, eps = {eps}"),
                format!("{pred:?} / {}", c.label),
                format!("{expected:?} both"),
                agree && pred == expected,
            ));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_lists_all_scenarios_once() {
        let r = ScenarioRegistry::default();
        assert_eq!(r.ids(), vec!["fig1", "fig2", "fig3", "fig4", "fig5", "fig7"]);
        assert!(r.get("fig6").is_err());
        assert_eq!(r.get("fig3").unwrap().id(), "fig3");
    }
}

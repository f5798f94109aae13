//! Subcommand runners. Each runner computes its results in memory first and
//! only then touches the output directory, so a failed run leaves no files.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::json;

use dfhn_core::atlas::{
    augmented_manifold, gnuplot_script, portrait, predict_regime, saddle_histories, write_atlas_csv,
    write_portrait_csv, AtlasSweep, PlotKind,
};
use dfhn_core::bifurcation::{
    bautin_locate, chebyshev_lobatto, fast_hopf_curve, full_hopf_curves, homoclinic_approx_curve, write_curves_csv,
    BifurcationCurve, CurveLabel, CurveMeta, CurveSample,
};
use dfhn_core::manifold::{critical_roots, general_equilibria, Y_FOLD};
use dfhn_core::model::{FastParams, FullModel, ModelInputs, ModelRegistry, State, SystemParams};
use dfhn_core::network::{simulate_network, NetworkConfig, NetworkInitial};
use dfhn_core::normal_form::{criticality_probe, lyap1_fast, lyap1_full, LyapunovResult, ProbeTarget, PROBE_DELTA_TAU};
use dfhn_core::reproduce::ScenarioRegistry;
use dfhn_core::solver::{fmt17, integrate, Coordinate, Direction, EventSpec, History, SolverConfig};
use dfhn_core::spectrum::{fast_stability, full_rightmost_root, general_rightmost_root, StabilityReport};

use crate::args::*;

/// Bad user input detected by the front end itself.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Writes output files, each followed by a `<name>.json` provenance sidecar.
struct Output<'a> {
    dir: &'a Path,
    command: &'static str,
    params: serde_json::Value,
}

impl<'a> Output<'a> {
    fn new<P: Serialize>(dir: &'a Path, command: &'static str, params: &P) -> Result<Self> {
        Ok(Self { dir, command, params: serde_json::to_value(params)? })
    }

    fn sidecar(&self, path: &Path) -> Result<()> {
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let doc = json!({
            "command": self.command,
            "file": name,
            "version": env!("CARGO_PKG_VERSION"),
            "params": self.params,
        });
        let mut side = path.as_os_str().to_owned();
        side.push(".json");
        fs::write(PathBuf::from(side), serde_json::to_string_pretty(&doc)? + "\n")?;
        Ok(())
    }

    fn write<F>(&self, name: &str, f: F) -> Result<PathBuf>
    where
        F: FnOnce(&mut BufWriter<File>) -> dfhn_core::Result<()>,
    {
        fs::create_dir_all(self.dir).with_context(|| format!("cannot create {}", self.dir.display()))?;
        let path = self.dir.join(name);
        let mut w = BufWriter::new(File::create(&path).with_context(|| format!("cannot create {}", path.display()))?);
        f(&mut w)?;
        w.flush()?;
        self.sidecar(&path)?;
        Ok(path)
    }

    fn write_text(&self, name: &str, text: &str) -> Result<PathBuf> {
        self.write(name, |w| Ok(w.write_all(text.as_bytes())?))
    }

    fn script(&self, csv: &str, title: &str, xl: &str, yl: &str, kind: PlotKind) -> Result<PathBuf> {
        let name = format!("{}.gp", csv.trim_end_matches(".csv"));
        self.write_text(&name, &gnuplot_script(csv, title, xl, yl, &kind))
    }
}

fn check_name(name: &str) -> Result<()> {
    let p = Path::new(name);
    if name.is_empty() || p.components().count() != 1 || p.file_name().is_none() {
        return Err(usage(format!("output must be a plain file name, got '{name}'")));
    }
    Ok(())
}

fn label<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        Ok(other) => other.to_string(),
        Err(_) => String::new(),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt17).unwrap_or_default()
}

fn system_params(s: &SystemArgs) -> SystemParams {
    SystemParams::new(s.j, s.a, s.epsilon, s.tau).with_slow_terms(s.gamma, s.b)
}

/// Apply user overrides; moving the transient keeps the analysis window length.
fn apply_run(mut cfg: SolverConfig, run: &RunArgs) -> SolverConfig {
    if let Some(h) = run.h_max {
        cfg.h_max = h;
    }
    if let Some(t) = run.t_discard {
        let window = cfg.t_end - cfg.t_discard;
        cfg.t_discard = t;
        cfg.t_end = t + window;
    }
    if let Some(t) = run.t_end {
        cfg.t_end = t;
    }
    cfg
}

pub fn run(cmd: &Command, out_dir: &Path) -> Result<()> {
    match cmd {
        Command::Simulate(a) => simulate(a, out_dir),
        Command::Stability(a) => stability(a, out_dir),
        Command::HopfCurves(a) => hopf_curves(a, out_dir),
        Command::FastDiagram(a) => fast_diagram(a, out_dir),
        Command::Lyapunov(a) => lyapunov(a, out_dir),
        Command::Bautin(a) => bautin(a, out_dir),
        Command::Atlas(a) => atlas(a, out_dir),
        Command::Portrait(a) => portrait_cmd(a, out_dir),
        Command::Poincare(a) => poincare(a, out_dir),
        Command::AverageManifold(a) => average_manifold(a, out_dir),
        Command::Network(a) => network(a, out_dir),
        Command::Reproduce(a) => reproduce(a, out_dir),
    }
}

fn simulate(a: &SimulateArgs, dir: &Path) -> Result<()> {
    check_name(&a.output)?;
    if a.stride == 0 {
        return Err(usage("stride must be at least 1"));
    }
    let p = system_params(&a.system);
    let model = ModelRegistry::default().build(&a.model, &ModelInputs { params: p, frozen_y: a.y })?;
    let (base, history) = match a.y {
        Some(y) if a.model == "fast" => (SolverConfig::for_fast(&p.fast(y)), History::constant(a.run.x0, y)),
        _ => (SolverConfig::for_full(&p), History::constant(a.run.x0, a.run.y0)),
    };
    let cfg = apply_run(base, &a.run).with_history(history);
    cfg.validate()?;
    let tr = integrate(model, &cfg)?;
    let out = Output::new(dir, "simulate", a)?;
    let path = out.write(&a.output, |w| tr.write_csv(w, a.stride))?;
    out.script(&a.output, "Trajectory", "t", "x", PlotKind::Lines { x: 0, y: 1, group: None })?;
    println!("wrote {} ({} mesh points, h = {})", path.display(), tr.len(), fmt17(tr.h()));
    Ok(())
}

fn stability(a: &StabilityArgs, dir: &Path) -> Result<()> {
    check_name(&a.output)?;
    let s = &a.system;
    let reports: Vec<(f64, StabilityReport)> = match a.kind {
        SystemKind::Full => {
            let p = system_params(s);
            p.validate()?;
            if p.is_standard() {
                vec![(s.a, full_rightmost_root(s.a, s.j, s.tau, s.epsilon)?)]
            } else {
                general_equilibria(s.a, s.b, s.gamma)?
                    .into_iter()
                    .map(|e| Ok((e.x, general_rightmost_root(e.x, s.j, s.tau, s.epsilon, s.gamma, s.b)?)))
                    .collect::<Result<_>>()?
            }
        }
        SystemKind::Fast => {
            FastParams::new(s.j, s.tau, a.y).validate()?;
            critical_roots(a.y)
                .into_iter()
                .map(|c| Ok((c.x, fast_stability(c.x, s.j, s.tau)?)))
                .collect::<Result<_>>()?
        }
    };
    let mut csv = String::from("x_star,verdict,re,im,branch,residual\n");
    for (x, r) in &reports {
        println!("x* = {:+.10}  rightmost Re = {:+.6e}  {}", x, r.rightmost_real_part, label(&r.verdict));
        for root in &r.roots_found {
            writeln!(
                csv,
                "{},{},{},{},{},{:.3e}",
                fmt17(*x),
                label(&r.verdict),
                fmt17(root.re),
                fmt17(root.im),
                root.branch.map(|k| k.to_string()).unwrap_or_default(),
                root.residual
            )?;
        }
    }
    Output::new(dir, "stability", a)?.write_text(&a.output, &csv)?;
    Ok(())
}

fn hopf_curves(a: &HopfCurvesArgs, dir: &Path) -> Result<()> {
    check_name(&a.output)?;
    let ks = a.k.as_indices().map_err(usage)?;
    if a.grid < 2 {
        return Err(usage("grid must be at least 2"));
    }
    let mut curves = Vec::new();
    for &k in &ks {
        let (c1, c2) = full_hopf_curves(a.j, a.epsilon, k, a.grid)?;
        curves.push(c1);
        curves.push(c2);
    }
    for &k in &ks {
        curves.push(fast_hopf_curve(a.j, k, a.grid)?);
    }
    let meta = CurveMeta { j: a.j, epsilon: Some(a.epsilon), grid: a.grid };
    let out = Output::new(dir, "hopf-curves", a)?;
    let path = out.write(&a.output, |w| write_curves_csv(w, &meta, &curves))?;
    out.script(&a.output, "Hopf curves", "a or x*", "tau", PlotKind::Lines { x: 2, y: 3, group: Some(0) })?;
    println!("wrote {} ({} curves)", path.display(), curves.len());
    Ok(())
}

fn fast_diagram(a: &FastDiagramArgs, dir: &Path) -> Result<()> {
    check_name(&a.output)?;
    let ks = a.k.as_indices().map_err(usage)?;
    if a.grid < 2 || !(a.tau_max > 0.0) || !(a.nu_max > 0.0) {
        return Err(usage("need grid >= 2, tau-max > 0 and nu-max > 0"));
    }
    let mut curves = Vec::new();
    for &k in &ks {
        curves.push(fast_hopf_curve(a.j, k, a.grid)?);
    }
    let taus = chebyshev_lobatto(0.0, a.tau_max, 16);
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
        samples: [Y_FOLD, -Y_FOLD]
            .iter()
            .map(|&y| CurveSample { param: 1.0 / a.j, tau: 1.0 / a.j, y: Some(y) })
            .collect(),
    });
    curves.push(homoclinic_approx_curve(a.j, a.nu_max, 32)?);
    let meta = CurveMeta { j: a.j, epsilon: None, grid: a.grid };
    let out = Output::new(dir, "fast-diagram", a)?;
    let path = out.write(&a.output, |w| write_curves_csv(w, &meta, &curves))?;
    out.script(&a.output, "Fast system", "y", "tau", PlotKind::Lines { x: 4, y: 3, group: Some(0) })?;
    println!("wrote {} ({} curves)", path.display(), curves.len());
    Ok(())
}

fn lyapunov(a: &LyapunovArgs, dir: &Path) -> Result<()> {
    check_name(&a.output)?;
    let (values, param) = match a.kind {
        SystemKind::Full => (&a.a.values, "a"),
        SystemKind::Fast => (&a.y.values, "y"),
    };
    let mut csv = format!("{param},tau,omega,ell1,criticality,convergence_delta,probe,error\n");
    for &v in values {
        let (res, target): (dfhn_core::Result<LyapunovResult>, _) = match a.kind {
            SystemKind::Full => (lyap1_full(a.j, a.epsilon, v), ProbeTarget::Full { j: a.j, epsilon: a.epsilon, a: v }),
            SystemKind::Fast => (lyap1_fast(a.j, v), ProbeTarget::Fast { j: a.j, y: v }),
        };
        match res {
            Ok(l) => {
                let probe = if a.probe {
                    criticality_probe(target, PROBE_DELTA_TAU).map(|r| label(&r.outcome)).unwrap_or_else(|e| e.to_string())
                } else {
                    String::new()
                };
                writeln!(
                    csv,
                    "{},{},{},{},{},{:.3e},{},",
                    fmt17(v),
                    fmt17(l.tau),
                    fmt17(l.omega),
                    fmt17(l.ell1),
                    label(&l.criticality),
                    l.convergence_delta,
                    probe
                )?;
            }
            Err(e) if e.is_validation() => return Err(e.into()),
            Err(e) => writeln!(csv, "{},,,,,,,\"{}\"", fmt17(v), e.to_string().replace('"', "'"))?,
        }
    }
    let out = Output::new(dir, "lyapunov", a)?;
    let path = out.write_text(&a.output, &csv)?;
    out.script(&a.output, "First Lyapunov coefficient", param, "ell1", PlotKind::Lines { x: 0, y: 3, group: None })?;
    println!("wrote {} ({} points)", path.display(), values.len());
    Ok(())
}

fn bautin(a: &BautinArgs, dir: &Path) -> Result<()> {
    check_name(&a.output)?;
    if !(a.tol_tau > 0.0) {
        return Err(usage("tol-tau must be positive"));
    }
    let b = bautin_locate(a.j, a.epsilon, a.tol_tau)?;
    let csv = format!(
        "a,tau_s,a_lo,a_hi,tau_lo,tau_hi,ell1_left,ell1_right\n{},{},{},{},{},{},{},{}\n",
        fmt17(b.a),
        fmt17(b.tau_s),
        fmt17(b.a_bracket.0),
        fmt17(b.a_bracket.1),
        fmt17(b.tau_bracket.0),
        fmt17(b.tau_bracket.1),
        fmt17(b.ell1_left),
        fmt17(b.ell1_right)
    );
    Output::new(dir, "bautin", a)?.write_text(&a.output, &csv)?;
    println!("Bautin point: a = {:.8}, tau_s = {:.8}", b.a, b.tau_s);
    Ok(())
}

fn atlas(a: &AtlasArgs, dir: &Path) -> Result<()> {
    check_name(&a.output)?;
    let mut sweep = AtlasSweep::new(a.j, a.epsilon, a.a.values.clone(), a.tau.values.clone());
    sweep.h_max = a.h_max;
    sweep.t_end = a.t_end;
    sweep.t_discard = a.t_discard;
    let rows = sweep.run(a.workers)?;
    for r in rows.iter().filter(|r| r.error.is_some()) {
        eprintln!(
            "warning: a = {}, tau = {}: {}",
            r.params.a,
            r.params.tau,
            r.error.as_deref().unwrap_or_default()
        );
    }
    let out = Output::new(dir, "atlas", a)?;
    let path = out.write(&a.output, |w| write_atlas_csv(w, &rows))?;
    out.script(&a.output, "Regime atlas", "tau", "a", PlotKind::Atlas)?;
    let mut counts = std::collections::BTreeMap::new();
    for r in &rows {
        *counts.entry(r.label.as_str()).or_insert(0usize) += 1;
    }
    println!("wrote {} ({} points)", path.display(), rows.len());
    for (l, n) in counts {
        println!("  {l:<16} {n}");
    }
    Ok(())
}

fn portrait_cmd(a: &PortraitArgs, dir: &Path) -> Result<()> {
    check_name(&a.output)?;
    let fp = FastParams::new(a.j, a.tau, a.y);
    fp.validate()?;
    let mut hist: Vec<(String, History)> =
        a.x0.values.iter().map(|&x| (format!("x0={x}"), History::constant(x, a.y))).collect();
    if a.saddles {
        hist.extend(saddle_histories(&fp)?);
    }
    let mut cfg = SolverConfig::for_fast(&fp);
    if let Some(t) = a.t_end {
        cfg.t_end = t;
        cfg.t_discard = cfg.t_discard.min(0.5 * t);
    }
    cfg.validate()?;
    let curves = portrait(&fp, &hist, &cfg)?;
    let out = Output::new(dir, "portrait", a)?;
    let path = out.write(&a.output, |w| write_portrait_csv(w, &curves))?;
    out.script(&a.output, "Fast phase portrait", "x(t - tau)", "x(t)", PlotKind::Lines { x: 1, y: 2, group: Some(0) })?;
    println!("wrote {} ({} curves)", path.display(), curves.len());
    Ok(())
}

fn poincare(a: &PoincareArgs, dir: &Path) -> Result<()> {
    check_name(&a.output)?;
    let p = system_params(&a.system);
    p.validate()?;
    let cfg = apply_run(SolverConfig::for_full(&p), &a.run).with_history(History::constant(a.run.x0, a.run.y0));
    cfg.validate()?;
    let tr = integrate(FullModel(p), &cfg)?;
    let c: Vec<_> = tr
        .detect_crossings(&EventSpec::new(Coordinate::Y, a.level, Direction::Up))
        .into_iter()
        .filter(|c| c.t >= tr.t_discard())
        .collect();
    if c.is_empty() {
        return Err(dfhn_core::Error::EmptySection.into());
    }
    let mut csv = String::from("n,t,x,y,x_delayed,x_delayed_next\n");
    for (i, cr) in c.iter().enumerate() {
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            i,
            fmt17(cr.t),
            fmt17(cr.state.x),
            fmt17(cr.state.y),
            fmt17(cr.x_delayed),
            opt(c.get(i + 1).map(|n| n.x_delayed))
        )?;
    }
    let out = Output::new(dir, "poincare", a)?;
    let path = out.write_text(&a.output, &csv)?;
    out.script(&a.output, "Return map", "x(t - tau)_n", "x(t - tau)_{n+1}", PlotKind::Points { x: 4, y: 5 })?;
    println!("wrote {} ({} crossings)", path.display(), c.len());
    Ok(())
}

fn average_manifold(a: &AverageManifoldArgs, dir: &Path) -> Result<()> {
    check_name(&a.output)?;
    let man = augmented_manifold(a.j, a.tau, &a.y.values)?;
    let predictions = match &a.predict_a {
        Some(r) => r.values.iter().map(|&x| Ok((x, predict_regime(&man, x)?))).collect::<Result<Vec<_>>>()?,
        None => Vec::new(),
    };
    let out = Output::new(dir, "average-manifold", a)?;
    let path = out.write(&a.output, |w| man.write_csv(w))?;
    out.script(&a.output, "Augmented slow manifold", "y", "x", PlotKind::Points { x: 0, y: 3 })?;
    println!("wrote {} ({} y values)", path.display(), man.points.len());
    for (x, r) in predictions {
        println!("a = {x}: predicted {}", label(&r));
    }
    Ok(())
}

fn network(a: &NetworkArgs, dir: &Path) -> Result<()> {
    check_name(&a.output)?;
    let p = system_params(&a.system);
    let mut cfg = NetworkConfig::new(a.n, a.sigma, a.seed, p.tau, a.t_end);
    if let Some(h) = a.h_max {
        cfg.h_max = h;
    }
    cfg.record_every = a.record_every;
    cfg.initial = NetworkInitial::Identical(State::new(a.x0, a.y0));
    let net = simulate_network(&p, &cfg)?;
    let out = Output::new(dir, "network", a)?;
    let path = out.write(&a.output, |w| net.write_csv(w))?;
    out.script(&a.output, "Network", "t", "x", PlotKind::Lines { x: 0, y: 2, group: Some(1) })?;
    println!("wrote {} ({} units, {} samples, h = {})", path.display(), net.n_units(), net.times.len(), fmt17(net.h));
    Ok(())
}

fn reproduce(a: &ReproduceArgs, dir: &Path) -> Result<()> {
    let reg = ScenarioRegistry::default();
    let scenarios = if a.id == "all" {
        reg.iter().collect::<Vec<_>>()
    } else {
        vec![reg.get(&a.id)?]
    };
    for s in scenarios {
        let sub = dir.join(s.id());
        fs::create_dir_all(&sub).with_context(|| format!("cannot create {}", sub.display()))?;
        let res = s.run(&sub)?;
        let out = Output::new(&sub, "reproduce", &json!({ "id": s.id() }))?;
        for f in res.files.iter().chain(&res.scripts) {
            out.sidecar(f)?;
        }
        println!("== {}: {}", s.id(), s.description());
        print!("{}", res.table());
        println!(
            "{} of {} checks pass\n",
            res.checks.iter().filter(|c| c.pass).count(),
            res.checks.len()
        );
    }
    Ok(())
}

//! Parallel parameter sweeps and their CSV and plotting-script exports.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SystemParams;
use crate::solver::{fmt17, SolverConfig};

use super::orbit::{classify, ClassifierConfig, RegimeLabel};

/// One sweep point, keyed by its grid indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtlasRow {
    pub index: (usize, usize),
    pub params: SystemParams,
    pub label: RegimeLabel,
    pub large_count: usize,
    pub small_count: usize,
    pub period: Option<f64>,
    pub lambda_hat: Option<f64>,
    /// Failure message when the point could not be classified.
    pub error: Option<String>,
}

/// Cartesian sweep over a and tau at fixed J and epsilon.
#[derive(Clone, Debug)]
pub struct AtlasSweep {
    pub j: f64,
    pub epsilon: f64,
    pub a_values: Vec<f64>,
    pub tau_values: Vec<f64>,
    pub classifier: ClassifierConfig,
    /// Overrides of the per-point solver defaults.
    pub h_max: Option<f64>,
    pub t_end: Option<f64>,
    pub t_discard: Option<f64>,
}

impl AtlasSweep {
    pub fn new(j: f64, epsilon: f64, a_values: Vec<f64>, tau_values: Vec<f64>) -> Self {
        Self {
            j,
            epsilon,
            a_values,
            tau_values,
            classifier: ClassifierConfig::default(),
            h_max: None,
            t_end: None,
            t_discard: None,
        }
    }

    fn solver_config(&self, p: &SystemParams) -> SolverConfig {
        let mut cfg = SolverConfig::for_full(p);
        if let Some(h) = self.h_max {
            cfg.h_max = h;
        }
        if let Some(t) = self.t_discard {
            let window = cfg.t_end - cfg.t_discard;
            cfg.t_discard = t;
            cfg.t_end = t + window;
        }
        if let Some(t) = self.t_end {
            cfg.t_end = t;
        }
        cfg
    }

    fn run_point(&self, ia: usize, it: usize) -> AtlasRow {
        let p = SystemParams::new(self.j, self.a_values[ia], self.epsilon, self.tau_values[it]);
        let cfg = self.solver_config(&p);
        match classify(&p, &cfg, &self.classifier) {
            Ok(c) => AtlasRow {
                index: (ia, it),
                params: p,
                label: c.label,
                large_count: c.stats.large_count,
                small_count: c.stats.small_count,
                period: c.stats.period,
                lambda_hat: c.stats.divergence_rate,
                error: None,
            },
            Err(e) => AtlasRow {
                index: (ia, it),
                params: p,
                label: RegimeLabel::Unclassified,
                large_count: 0,
                small_count: 0,
                period: None,
                lambda_hat: None,
                error: Some(e.to_string()),
            },
        }
    }

    /// Classify every grid point on a pool of `workers` threads (0 uses the
    /// global pool). Rows come back ordered by (a index, tau index).
    pub fn run(&self, workers: usize) -> Result<Vec<AtlasRow>> {
        if self.a_values.is_empty() || self.tau_values.is_empty() {
            return Err(Error::InvalidConfig("atlas sweep needs at least one a and one tau".into()));
        }
        SystemParams::new(self.j, self.a_values[0], self.epsilon, self.tau_values[0]).validate()?;
        let tasks: Vec<(usize, usize)> = (0..self.a_values.len())
            .flat_map(|ia| (0..self.tau_values.len()).map(move |it| (ia, it)))
            .collect();
        let go = || tasks.par_iter().map(|&(ia, it)| self.run_point(ia, it)).collect::<Vec<_>>();
        let mut rows = if workers == 0 {
            go()
        } else {
            rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?
                .install(go)
        };
        rows.sort_by_key(|r| r.index);
        Ok(rows)
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt17).unwrap_or_default()
}

/// CSV with header `J,epsilon,a,tau,label,large_count,small_count,period,lambda_hat`.
pub fn write_atlas_csv<W: Write>(w: W, rows: &[AtlasRow]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["J", "epsilon", "a", "tau", "label", "large_count", "small_count", "period", "lambda_hat"])?;
    for r in rows {
        wr.write_record([
            fmt17(r.params.j),
            fmt17(r.params.epsilon),
            fmt17(r.params.a),
            fmt17(r.params.tau),
            r.label.as_str().to_string(),
            r.large_count.to_string(),
            r.small_count.to_string(),
            opt(r.period),
            opt(r.lambda_hat),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

/// What a plotting script should draw from a CSV file.
#[derive(Clone, Debug, PartialEq)]
pub enum PlotKind {
    /// Atlas strip or map: tau against a coloured by label.
    Atlas,
    /// Columns (x, y) of a CSV, one series per distinct value of `group`.
    Lines { x: usize, y: usize, group: Option<usize> },
    /// Scatter of two columns.
    Points { x: usize, y: usize },
}

/// Standalone gnuplot script reading `csv_name` relative to its own folder.
pub fn gnuplot_script(csv_name: &str, title: &str, xlabel: &str, ylabel: &str, kind: &PlotKind) -> String {
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str("set key outside\n");
    s.push_str(&format!("set title \"{title}\"\n"));
    s.push_str(&format!("set xlabel \"{xlabel}\"\nset ylabel \"{ylabel}\"\n"));
    s.push_str("set terminal pngcairo size 1000,700\n");
    let png = csv_name.trim_end_matches(".csv");
    s.push_str(&format!("set output '{png}.png'\n"));
    match kind {
        PlotKind::Atlas => {
            let labels = [
                "Stationary",
                "SmallCycle",
                "Relaxation",
                "MMO",
                "FastSpiking",
                "Bursting",
                "TorusCanardLike",
                "Chaotic",
                "Unclassified",
            ];
            let series: Vec<String> = labels
                .iter()
                .map(|l| format!("'{csv_name}' every ::1 using 4:(strcol(5) eq '{l}' ? $3 : 1/0) with points pt 5 title '{l}'"))
                .collect();
            s.push_str(&format!("plot {}\n", series.join(", \\\n     ")));
        }
        PlotKind::Lines { x, y, group: None } => {
            s.push_str(&format!("plot '{csv_name}' every ::1 using {}:{} with lines notitle\n", x + 1, y + 1));
        }
        PlotKind::Lines { x, y, group: Some(g) } => {
            s.push_str(&format!(
                "groups = system(\"tail -n +2 {csv_name} | grep -v '^#' | cut -d, -f{} | sort -u\")\n",
                g + 1
            ));
            s.push_str(&format!(
                "plot for [k in groups] '{csv_name}' every ::1 using (strcol({g1}) eq k ? ${x1} : 1/0):{y1} with lines title k\n",
                g1 = g + 1,
                x1 = x + 1,
                y1 = y + 1
            ));
        }
        PlotKind::Points { x, y } => {
            s.push_str(&format!("plot '{csv_name}' every ::1 using {}:{} with points pt 7 ps 0.4 notitle\n", x + 1, y + 1));
        }
    }
    s
}

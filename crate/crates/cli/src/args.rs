//! Command-line definitions. Every default lives in the `default_value`
//! attributes below and is dumped by `--print-defaults`.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::RangeArg;

#[derive(Parser, Debug)]
#[command(name = "dfhn", version, about = "Delayed FitzHugh-Nagumo analysis toolkit")]
pub struct Cli {
    /// Directory for output files.
    #[arg(long, global = true, default_value = "dfhn-out", value_name = "DIR")]
    pub out_dir: PathBuf,

    /// Line-oriented key=value file; flags on the command line override it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Print the default of every option as key=value and exit.
    #[arg(long, global = true)]
    pub print_defaults: bool,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Integrate one trajectory and write t,x,y,x_delayed.
    #[command(args_override_self = true)]
    Simulate(SimulateArgs),
    /// Rightmost characteristic roots at the equilibria.
    #[command(args_override_self = true)]
    Stability(StabilityArgs),
    /// Full-system Hopf curves tau_1^k, tau_2^k and fast curves tau_f^k.
    #[command(args_override_self = true)]
    HopfCurves(HopfCurvesArgs),
    /// Fast-system bifurcation diagram in (y, tau).
    #[command(args_override_self = true)]
    FastDiagram(FastDiagramArgs),
    /// First Lyapunov coefficient along tau_1^0 or tau_f^0.
    #[command(args_override_self = true)]
    Lyapunov(LyapunovArgs),
    /// Locate the sign change of the first Lyapunov coefficient on tau_1^0.
    #[command(args_override_self = true)]
    Bautin(BautinArgs),
    /// Classify dynamics on an (a, tau) grid.
    #[command(args_override_self = true)]
    Atlas(AtlasArgs),
    /// Fast-system phase portraits in (x(t - tau), x(t)).
    #[command(args_override_self = true)]
    Portrait(PortraitArgs),
    /// Poincare section of a full-system trajectory.
    #[command(args_override_self = true)]
    Poincare(PoincareArgs),
    /// Critical manifold augmented with fast cycle averages.
    #[command(args_override_self = true)]
    AverageManifold(AverageManifoldArgs),
    /// Stochastic network of mean-field coupled units.
    #[command(args_override_self = true)]
    Network(NetworkArgs),
    /// Run a canned reproduction and print its pass/fail table.
    #[command(args_override_self = true)]
    Reproduce(ReproduceArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Stability(_) => "stability",
            Command::HopfCurves(_) => "hopf-curves",
            Command::FastDiagram(_) => "fast-diagram",
            Command::Lyapunov(_) => "lyapunov",
            Command::Bautin(_) => "bautin",
            Command::Atlas(_) => "atlas",
            Command::Portrait(_) => "portrait",
            Command::Poincare(_) => "poincare",
            Command::AverageManifold(_) => "average-manifold",
            Command::Network(_) => "network",
            Command::Reproduce(_) => "reproduce",
        }
    }
}

/// Parameters of the full system.
#[derive(Args, Clone, Debug, Serialize)]
pub struct SystemArgs {
    /// Coupling strength.
    #[arg(long = "J", default_value_t = 2.0, allow_negative_numbers = true)]
    pub j: f64,
    /// Input parameter.
    #[arg(long, default_value_t = 1.01, allow_negative_numbers = true)]
    pub a: f64,
    /// Timescale ratio epsilon.
    #[arg(long = "eps", default_value_t = 0.05, allow_negative_numbers = true)]
    pub epsilon: f64,
    /// Delay.
    #[arg(long, default_value_t = 0.4, allow_negative_numbers = true)]
    pub tau: f64,
    /// Leak of the slow variable.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub gamma: f64,
    /// Coupling of x into the slow equation.
    #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
    pub b: f64,
}

/// Integration controls; unset values use the library defaults.
#[derive(Args, Clone, Debug, Serialize)]
pub struct RunArgs {
    /// Maximal step; the step used divides tau.
    #[arg(long, allow_negative_numbers = true)]
    pub h_max: Option<f64>,
    /// Final time.
    #[arg(long, allow_negative_numbers = true)]
    pub t_end: Option<f64>,
    /// Transient dropped before analysis.
    #[arg(long, allow_negative_numbers = true)]
    pub t_discard: Option<f64>,
    /// Constant history value of x.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub x0: f64,
    /// Constant history value of y.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub y0: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Model name: full, general or fast.
    #[arg(long, default_value = "full")]
    pub model: String,
    /// Frozen slow variable for the fast model.
    #[arg(long, allow_negative_numbers = true)]
    pub y: Option<f64>,
    /// Write every k-th mesh point.
    #[arg(long, default_value_t = 10)]
    pub stride: usize,
    #[arg(long, default_value = "trajectory.csv")]
    pub output: String,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    Full,
    Fast,
}

#[derive(Args, Debug, Serialize)]
pub struct StabilityArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    /// Full system at its equilibria or the fast system at frozen y.
    #[arg(long = "system", value_enum, default_value_t = SystemKind::Full)]
    pub kind: SystemKind,
    /// Frozen slow variable for the fast system.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub y: f64,
    #[arg(long, default_value = "stability.csv")]
    pub output: String,
}

#[derive(Args, Debug, Serialize)]
pub struct HopfCurvesArgs {
    #[arg(long = "J", default_value_t = 2.0, allow_negative_numbers = true)]
    pub j: f64,
    #[arg(long = "eps", default_value_t = 0.01, allow_negative_numbers = true)]
    pub epsilon: f64,
    /// Branch indices, e.g. 0..3.
    #[arg(long, default_value = "0..3")]
    pub k: RangeArg,
    /// Samples per curve.
    #[arg(long, default_value_t = 256)]
    pub grid: usize,
    #[arg(long, default_value = "hopf_curves.csv")]
    pub output: String,
}

#[derive(Args, Debug, Serialize)]
pub struct FastDiagramArgs {
    #[arg(long = "J", default_value_t = 2.0, allow_negative_numbers = true)]
    pub j: f64,
    #[arg(long, default_value = "0..2")]
    pub k: RangeArg,
    #[arg(long, default_value_t = 256)]
    pub grid: usize,
    /// Homoclinic approximation drawn for J tau - 1 in [0, nu_max].
    #[arg(long, default_value_t = 0.15, allow_negative_numbers = true)]
    pub nu_max: f64,
    /// Largest tau on the saddle-node lines.
    #[arg(long, default_value_t = 3.0, allow_negative_numbers = true)]
    pub tau_max: f64,
    #[arg(long, default_value = "fast_diagram.csv")]
    pub output: String,
}

#[derive(Args, Debug, Serialize)]
pub struct LyapunovArgs {
    #[arg(long = "system", value_enum, default_value_t = SystemKind::Full)]
    pub kind: SystemKind,
    #[arg(long = "J", default_value_t = 2.0, allow_negative_numbers = true)]
    pub j: f64,
    #[arg(long = "eps", default_value_t = 0.01, allow_negative_numbers = true)]
    pub epsilon: f64,
    /// Values of a along tau_1^0 (full system).
    #[arg(long, default_value = "1.05:2.2:0.05", allow_hyphen_values = true)]
    pub a: RangeArg,
    /// Values of y along tau_f^0 (fast system).
    #[arg(long, default_value = "-1.2:1.2:0.2", allow_hyphen_values = true)]
    pub y: RangeArg,
    /// Also run the simulation probe just past each Hopf point.
    #[arg(long)]
    pub probe: bool,
    #[arg(long, default_value = "lyapunov.csv")]
    pub output: String,
}

#[derive(Args, Debug, Serialize)]
pub struct BautinArgs {
    #[arg(long = "J", default_value_t = 2.0, allow_negative_numbers = true)]
    pub j: f64,
    #[arg(long = "eps", default_value_t = 0.01, allow_negative_numbers = true)]
    pub epsilon: f64,
    /// Width of the final tau bracket.
    #[arg(long, default_value_t = 1e-6, allow_negative_numbers = true)]
    pub tol_tau: f64,
    #[arg(long, default_value = "bautin.csv")]
    pub output: String,
}

#[derive(Args, Debug, Serialize)]
pub struct AtlasArgs {
    #[arg(long = "J", default_value_t = 2.0, allow_negative_numbers = true)]
    pub j: f64,
    #[arg(long = "eps", default_value_t = 0.05, allow_negative_numbers = true)]
    pub epsilon: f64,
    #[arg(long, default_value = "1.01", allow_hyphen_values = true)]
    pub a: RangeArg,
    #[arg(long, default_value = "0.35:1.1:0.01", allow_hyphen_values = true)]
    pub tau: RangeArg,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    #[arg(long, allow_negative_numbers = true)]
    pub h_max: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub t_end: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub t_discard: Option<f64>,
    #[arg(long, default_value = "atlas.csv")]
    pub output: String,
}

#[derive(Args, Debug, Serialize)]
pub struct PortraitArgs {
    #[arg(long = "J", default_value_t = 2.0, allow_negative_numbers = true)]
    pub j: f64,
    #[arg(long, default_value_t = 0.7, allow_negative_numbers = true)]
    pub tau: f64,
    /// Frozen slow variable.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub y: f64,
    /// Constant histories x0.
    #[arg(long, default_value = "-3,0,3", allow_hyphen_values = true)]
    pub x0: RangeArg,
    /// Add histories just off the saddle.
    #[arg(long)]
    pub saddles: bool,
    #[arg(long, allow_negative_numbers = true)]
    pub t_end: Option<f64>,
    #[arg(long, default_value = "portrait.csv")]
    pub output: String,
}

#[derive(Args, Debug, Serialize)]
pub struct PoincareArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Section y = level, crossed upwards.
    #[arg(long, default_value_t = -0.4, allow_negative_numbers = true)]
    pub level: f64,
    #[arg(long, default_value = "poincare.csv")]
    pub output: String,
}

#[derive(Args, Debug, Serialize)]
pub struct AverageManifoldArgs {
    #[arg(long = "J", default_value_t = 2.0, allow_negative_numbers = true)]
    pub j: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub tau: f64,
    #[arg(long, default_value = "-2:2:0.05", allow_hyphen_values = true)]
    pub y: RangeArg,
    /// Report the predicted regime for these values of a.
    #[arg(long, allow_hyphen_values = true)]
    pub predict_a: Option<RangeArg>,
    #[arg(long, default_value = "average_manifold.csv")]
    pub output: String,
}

#[derive(Args, Debug, Serialize)]
pub struct NetworkArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    /// Number of units.
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    /// Noise intensity.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, allow_negative_numbers = true)]
    pub h_max: Option<f64>,
    #[arg(long, default_value_t = 200.0, allow_negative_numbers = true)]
    pub t_end: f64,
    /// Store every k-th step.
    #[arg(long, default_value_t = 10)]
    pub record_every: usize,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub x0: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub y0: f64,
    #[arg(long, default_value = "network.csv")]
    pub output: String,
}

#[derive(Args, Debug, Serialize)]
pub struct ReproduceArgs {
    /// Scenario id (fig1, fig2, fig3, fig4, fig5, fig7) or "all".
    #[arg(default_value = "all")]
    pub id: String,
}

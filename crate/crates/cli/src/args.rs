use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ihskit::sketch::SketchKind;

#[derive(Debug, Parser)]
#[command(
    name = "ihskit",
    args_override_self = true,
    version,
    about = "Sketched least-squares solvers, experiment runners and sketch diagnostics"
)]
pub struct Cli {
    /// Worker threads; 1 gives the bit-exact reference run. Default: all cores.
    #[arg(long, global = true, env = "IHSKIT_THREADS", value_name = "N")]
    pub threads: Option<usize>,

    /// Flat TOML file of `flag = value` pairs; flags on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one least-squares problem and write the solution and a report.
    #[command(args_override_self = true)]
    Solve(SolveArgs),
    /// Regenerate one of the figure experiments as CSV.
    #[command(args_override_self = true)]
    Experiment(ExperimentArgs),
    /// Print per-round Z1/Z2 contraction certificates of an IHS run.
    #[command(args_override_self = true)]
    Diagnose(DiagnoseArgs),
    /// Monte Carlo estimate of the projection constant η for a sketch family.
    #[command(args_override_self = true)]
    VerifyCondition(VerifyArgs),
    /// Project a vector or matrix onto a constraint set.
    #[command(args_override_self = true)]
    Project(ProjectArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Unconstrained,
    Sparse,
    Lowrank,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConstraintKind {
    Unconstrained,
    L1,
    Nuclear,
    Simplex,
    Box,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Exact,
    Classical,
    Hessian,
    Ihs,
}

#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    /// Data matrix A as headerless CSV (one matrix row per line).
    #[arg(long = "a", value_name = "CSV", conflicts_with = "generate", requires = "y")]
    pub a: Option<PathBuf>,

    /// Responses as headerless CSV: n rows, one column per response.
    #[arg(long = "y", value_name = "CSV", requires = "a")]
    pub y: Option<PathBuf>,

    /// Draw a random problem instead of reading files.
    #[arg(long, value_enum, required_unless_present = "a")]
    pub generate: Option<Family>,

    /// Rows of the generated A.
    #[arg(long, value_name = "N")]
    pub n: Option<usize>,

    /// Columns of the generated A.
    #[arg(long, value_name = "D")]
    pub d: Option<usize>,

    /// Responses of a generated low-rank problem. Default: same as --d.
    #[arg(long, value_name = "D2")]
    pub d2: Option<usize>,

    /// Sparsity s of the truth; also the width hint for ℓ1 problems.
    #[arg(long, value_name = "S")]
    pub sparsity: Option<usize>,

    /// Rank r of the truth; also the width hint for nuclear-norm problems.
    #[arg(long, value_name = "R")]
    pub rank: Option<usize>,

    /// Noise level. For generated problems default 1.
    #[arg(long, value_name = "SIGMA")]
    pub sigma: Option<f64>,

    /// Seed of the generated problem. Default: --seed.
    #[arg(long, value_name = "SEED")]
    pub problem_seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct ConstraintArgs {
    /// Constraint set. Default: unconstrained, or the generator's own set.
    #[arg(long, value_enum)]
    pub constraint: Option<ConstraintKind>,

    /// Radius of the ℓ1 or nuclear-norm ball.
    #[arg(long, value_name = "R")]
    pub radius: Option<f64>,

    /// Lower bound of every box coordinate.
    #[arg(long, value_name = "LO", allow_negative_numbers = true)]
    pub lo: Option<f64>,

    /// Upper bound of every box coordinate.
    #[arg(long, value_name = "HI", allow_negative_numbers = true)]
    pub hi: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SketchArgs {
    #[arg(long, default_value = "gaussian", value_parser = parse_kind)]
    pub sketch: SketchKind,

    /// Rows per sketch. Default: recommended from the constraint's width.
    #[arg(long, value_name = "M")]
    pub m: Option<usize>,

    /// IHS rounds. Default: recommended from σ when known, else 1 + ⌈ln n⌉.
    #[arg(long, value_name = "N")]
    pub rounds: Option<usize>,

    /// Target per-round contraction, in (0, 1/2].
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,

    /// Constant of the sketch-size rule m = ⌈(c0/ρ²) W²⌉.
    #[arg(long, default_value_t = ihskit::ihs::DEFAULT_C0)]
    pub c0: f64,

    /// Master seed for every random draw.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct InnerArgs {
    /// Inner solver tolerance on the gradient mapping, relative to max(1, ‖c‖).
    #[arg(long, default_value_t = 1e-10)]
    pub inner_tol: f64,

    #[arg(long, default_value_t = 20_000)]
    pub inner_max_iter: usize,

    /// Plain projected gradient instead of FISTA.
    #[arg(long)]
    pub no_acceleration: bool,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub constraint: ConstraintArgs,
    #[command(flatten)]
    pub sketch: SketchArgs,
    #[command(flatten)]
    pub inner: InnerArgs,

    #[arg(long, value_enum, default_value = "ihs")]
    pub method: MethodArg,

    /// Reference solution as CSV, or `exact` to compute x_LS. Enables
    /// the ‖x̂ − x_LS‖_A report.
    #[arg(long, value_name = "CSV|exact")]
    pub reference: Option<String>,

    /// Record Z1/Z2 per IHS round (unconstrained only).
    #[arg(long)]
    pub certificates: bool,

    /// Record wall-clock seconds (outputs are then not reproducible).
    #[arg(long)]
    pub timings: bool,

    /// Output directory for solution.csv, report.json and trace.csv.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// fig1, fig2, fig3, fig4, fig5 or fig6a.
    pub id: String,

    #[arg(long)]
    pub trials: Option<usize>,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    /// Comma-separated row counts.
    #[arg(long = "n", value_delimiter = ',', value_name = "N,...")]
    pub n_values: Option<Vec<usize>>,

    /// Comma-separated dimensions.
    #[arg(long = "d", value_delimiter = ',', value_name = "D,...")]
    pub d_values: Option<Vec<usize>>,

    /// Comma-separated sketch-size factors.
    #[arg(long = "gamma", value_delimiter = ',', value_name = "G,...")]
    pub gammas: Option<Vec<f64>>,

    #[arg(long)]
    pub rounds: Option<usize>,

    /// Per-round sketch size, replacing the figure's rule.
    #[arg(long)]
    pub m: Option<usize>,

    #[arg(long)]
    pub sigma: Option<f64>,

    #[arg(long, default_value = "gaussian", value_parser = parse_kind)]
    pub sketch: SketchKind,

    /// Full-size grids and trial counts.
    #[arg(long)]
    pub full_scale: bool,

    /// Fill the seconds column.
    #[arg(long)]
    pub timings: bool,

    #[command(flatten)]
    pub inner: InnerArgs,

    /// CSV destination. Default: standard output.
    #[arg(long, value_name = "CSV")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub constraint: ConstraintArgs,
    #[command(flatten)]
    pub sketch: SketchArgs,
    #[command(flatten)]
    pub inner: InnerArgs,

    /// Also write the table as JSON.
    #[arg(long, value_name = "FILE")]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_parser = parse_kind)]
    pub kind: SketchKind,

    #[arg(long)]
    pub n: usize,

    #[arg(long)]
    pub m: usize,

    #[arg(long, default_value_t = 2000)]
    pub trials: usize,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    /// Matrix whose leverage scores drive rowsample_leverage.
    #[arg(long = "a", value_name = "CSV")]
    pub a: Option<PathBuf>,

    #[arg(long, value_name = "FILE")]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    #[command(flatten)]
    pub constraint: ConstraintArgs,

    /// Point as headerless CSV. Nuclear-norm sets read it as a matrix.
    #[arg(long, value_name = "CSV", required_unless_present = "point")]
    pub x: Option<PathBuf>,

    /// Point given inline as comma-separated values.
    #[arg(
        long,
        value_delimiter = ',',
        allow_negative_numbers = true,
        conflicts_with = "x",
        value_name = "V,..."
    )]
    pub point: Option<Vec<f64>>,

    /// Destination CSV. Default: standard output.
    #[arg(long, value_name = "CSV")]
    pub out: Option<PathBuf>,
}

fn parse_kind(s: &str) -> Result<SketchKind, String> {
    s.parse().map_err(|e: ihskit::Error| e.to_string())
}

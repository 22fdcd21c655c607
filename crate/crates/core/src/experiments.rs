//! Random problem ensembles, error metrics, and runners that regenerate the
//! convergence and scaling figures as CSV rows.
//!
//! Every random object below derives from the master seed, the grid point and
//! the trial index, so a row can be recomputed alone.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constraints::{l1_norm, nuclear_norm, ConstraintSet};
use crate::error::{Error, Result};
use crate::ihs::{
    classical_sketch_solve, hessian_sketch_solve, ihs_solve, solve_exact, IhsConfig, LsProblem,
    WidthHint,
};
use crate::linalg::{norm2, sub_vec, DenseMatrix};
use crate::rng::{derive_seed, gaussian_matrix, gaussian_vec, rademacher_vec, stream_rng};
use crate::sketch::{SketchKind, SketchSpec};
use crate::subsolver::SolverControls;

pub const CSV_HEADER: [&str; 11] = [
    "experiment",
    "trial",
    "n",
    "d",
    "method",
    "iter",
    "err_ls_semi",
    "err_truth_semi",
    "err_truth_l2",
    "seconds",
    "flag",
];

const TAG_PROBLEM: u64 = 1;
const TAG_IHS: u64 = 2;
const TAG_CLASSICAL: u64 = 3;
const TAG_HESSIAN: u64 = 4;

/// `‖A(x − xref)‖_F / √n`; `x` may hold several columns (column-major).
pub fn prediction_seminorm(a: &DenseMatrix, x: &[f64], xref: &[f64]) -> Result<f64> {
    let p = a.cols();
    if x.len() != xref.len() || p == 0 || x.len() % p != 0 || x.is_empty() {
        return Err(Error::DimensionMismatch {
            context: "semi-norm operands",
            expected: xref.len(),
            got: x.len(),
        });
    }
    let k = x.len() / p;
    let diff = DenseMatrix::from_col_major(p, k, &sub_vec(x, xref))?;
    Ok(a.matmul(&diff)?.frobenius_norm() / (a.rows() as f64).sqrt())
}

fn noisy_response(a: &DenseMatrix, x: &DenseMatrix, sigma: f64, rng: &mut impl rand::Rng) -> Vec<f64> {
    let clean = a.matmul(x).expect("inner dimensions agree").to_col_major();
    let noise = gaussian_vec(rng, clean.len());
    clean.iter().zip(noise).map(|(c, w)| c + sigma * w).collect()
}

/// `A` with i.i.d. N(0,1) entries, `x*` uniform on the unit sphere,
/// `y = Ax* + w` with `w ~ N(0, σ²I)`.
pub fn gen_unconstrained(n: usize, d: usize, sigma: f64, seed: u64) -> Result<LsProblem> {
    if d == 0 || n <= d {
        return Err(Error::InvalidArgument(format!(
            "unconstrained ensemble needs n > d ≥ 1 (n = {n}, d = {d})"
        )));
    }
    let mut rng = stream_rng(seed, TAG_PROBLEM);
    let a = gaussian_matrix(&mut rng, n, d);
    let mut x = gaussian_vec(&mut rng, d);
    let nrm = norm2(&x);
    x.iter_mut().for_each(|v| *v /= nrm);
    let y = noisy_response(&a, &DenseMatrix::column_vector(&x)?, sigma, &mut rng);
    LsProblem::new(a, y, ConstraintSet::Unconstrained)?.with_truth(x, sigma)
}

/// `x*` with `s` entries `±1/√s` on a uniform support; constraint
/// `‖x‖₁ ≤ ‖x*‖₁ = √s`.
pub fn gen_sparse(n: usize, d: usize, s: usize, sigma: f64, seed: u64) -> Result<LsProblem> {
    if s == 0 || s > d || n == 0 {
        return Err(Error::InvalidArgument(format!(
            "sparse ensemble needs 1 ≤ s ≤ d and n ≥ 1 (n = {n}, d = {d}, s = {s})"
        )));
    }
    let mut rng = stream_rng(seed, TAG_PROBLEM);
    let a = gaussian_matrix(&mut rng, n, d);
    let support = sample(&mut rng, d, s).into_vec();
    let signs = rademacher_vec(&mut rng, s);
    let mut x = vec![0.0; d];
    let amp = 1.0 / (s as f64).sqrt();
    for (&j, sg) in support.iter().zip(signs) {
        x[j] = sg * amp;
    }
    let y = noisy_response(&a, &DenseMatrix::column_vector(&x)?, sigma, &mut rng);
    let set = ConstraintSet::l1_ball(l1_norm(&x))?;
    LsProblem::new(a, y, set)?.with_truth(x, sigma)
}

/// `Y = AX* + W` with `X*` a unit-Frobenius product of Gaussian `d1 x r` and
/// `r x d2` factors; constraint `‖X‖_nuc ≤ ‖X*‖_nuc`.
pub fn gen_lowrank(n: usize, d1: usize, d2: usize, r: usize, sigma: f64, seed: u64) -> Result<LsProblem> {
    if r == 0 || r > d1.min(d2) || n == 0 {
        return Err(Error::InvalidArgument(format!(
            "low-rank ensemble needs 1 ≤ r ≤ min(d1, d2) and n ≥ 1 (n = {n}, {d1}x{d2}, r = {r})"
        )));
    }
    let mut rng = stream_rng(seed, TAG_PROBLEM);
    let a = gaussian_matrix(&mut rng, n, d1);
    let left = gaussian_matrix(&mut rng, d1, r);
    let right = gaussian_matrix(&mut rng, r, d2);
    let prod = left.matmul(&right)?;
    let x = prod.scaled(1.0 / prod.frobenius_norm());
    let y = noisy_response(&a, &x, sigma, &mut rng);
    let truth = x.to_col_major();
    let set = ConstraintSet::nuclear_ball(nuclear_norm(&truth, d1, d2)?, d1, d2)?;
    LsProblem::with_responses(a, y, d2, set)?.with_truth(truth, sigma)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Unconstrained { d: usize },
    Sparse { d: usize, s: usize },
    LowRank { d1: usize, d2: usize, r: usize },
}

impl Family {
    pub fn width(&self) -> WidthHint {
        match *self {
            Family::Unconstrained { d } => WidthHint::Unconstrained { d },
            Family::Sparse { d, s } => WidthHint::Sparse { d, s },
            Family::LowRank { d1, d2, r } => WidthHint::LowRank { d1, d2, r },
        }
    }

    /// Length of the flattened variable.
    pub fn dim(&self) -> usize {
        match *self {
            Family::Unconstrained { d } | Family::Sparse { d, .. } => d,
            Family::LowRank { d1, d2, .. } => d1 * d2,
        }
    }
}

/// A seeded family of random problems.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub family: Family,
    pub n: usize,
    pub sigma: f64,
    pub trials: usize,
    pub seed: u64,
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be ≥ 1".into()));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("sigma must be ≥ 0, got {}", self.sigma)));
        }
        self.family.width().squared_width().map(|_| ())
    }

    pub fn problem_seed(&self, trial: usize) -> u64 {
        derive_seed(self.seed, TAG_PROBLEM, trial as u64)
    }

    pub fn generate(&self, trial: usize) -> Result<LsProblem> {
        let seed = self.problem_seed(trial);
        match self.family {
            Family::Unconstrained { d } => gen_unconstrained(self.n, d, self.sigma, seed),
            Family::Sparse { d, s } => gen_sparse(self.n, d, s, self.sigma, seed),
            Family::LowRank { d1, d2, r } => gen_lowrank(self.n, d1, d2, r, self.sigma, seed),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    Classical,
    Ihs,
    Hessian,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Classical => "classical",
            Method::Ihs => "ihs",
            Method::Hessian => "hessian",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowFlag {
    Ok,
    InnerNonconverged,
    Failed,
}

impl RowFlag {
    pub fn name(self) -> &'static str {
        match self {
            RowFlag::Ok => "ok",
            RowFlag::InnerNonconverged => "inner_nonconverged",
            RowFlag::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub experiment: String,
    pub trial: usize,
    pub n: usize,
    pub d: usize,
    pub method: Method,
    pub iter: usize,
    pub err_ls_semi: Option<f64>,
    pub err_truth_semi: Option<f64>,
    pub err_truth_l2: Option<f64>,
    /// Recorded only when timings are requested.
    pub seconds: Option<f64>,
    pub flag: RowFlag,
}

fn fmt_float(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

impl ExperimentRow {
    pub fn record(&self) -> [String; 11] {
        [
            self.experiment.clone(),
            self.trial.to_string(),
            self.n.to_string(),
            self.d.to_string(),
            self.method.name().to_owned(),
            self.iter.to_string(),
            fmt_float(self.err_ls_semi),
            fmt_float(self.err_truth_semi),
            fmt_float(self.err_truth_l2),
            fmt_float(self.seconds),
            self.flag.name().to_owned(),
        ]
    }
}

/// Writes the fixed header and one line per row.
pub fn write_rows_csv<W: Write>(rows: &[ExperimentRow], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in rows {
        w.write_record(row.record())?;
    }
    w.flush()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExperimentId {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6a,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 6] = [
        ExperimentId::Fig1,
        ExperimentId::Fig2,
        ExperimentId::Fig3,
        ExperimentId::Fig4,
        ExperimentId::Fig5,
        ExperimentId::Fig6a,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::Fig1 => "fig1",
            ExperimentId::Fig2 => "fig2",
            ExperimentId::Fig3 => "fig3",
            ExperimentId::Fig4 => "fig4",
            ExperimentId::Fig5 => "fig5",
            ExperimentId::Fig6a => "fig6a",
        }
    }

    pub fn valid_ids() -> String {
        Self::ALL.map(|id| id.name()).join(", ")
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|id| id.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown experiment id '{s}' (valid ids: {})",
                    Self::valid_ids()
                ))
            })
    }
}

/// Adjustments to an experiment's default recipe. `None` keeps the default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Overrides {
    pub seed: u64,
    pub trials: Option<usize>,
    /// Row counts `n` (fig1, fig2, fig4, fig6a).
    pub n_values: Option<Vec<usize>>,
    /// Dimensions `d` (fig1, fig2, fig3, fig4, fig5).
    pub d_values: Option<Vec<usize>>,
    /// Sketch-size factors (fig2, fig4, fig5).
    pub gammas: Option<Vec<f64>>,
    pub rounds: Option<usize>,
    /// Per-round sketch size, replacing the recipe's rule.
    pub m: Option<usize>,
    pub sigma: Option<f64>,
    pub sketch: SketchKind,
    /// Full-size grids and trial counts instead of desk scale.
    pub full_scale: bool,
    pub inner: SolverControls,
    pub timings: bool,
}

impl Default for Overrides {
    fn default() -> Self {
        Self {
            seed: 1,
            trials: None,
            n_values: None,
            d_values: None,
            gammas: None,
            rounds: None,
            m: None,
            sigma: None,
            sketch: SketchKind::Gaussian,
            full_scale: false,
            inner: SolverControls::default(),
            timings: false,
        }
    }
}

/// How a grid point is solved.
#[derive(Debug, Clone, PartialEq)]
struct Plan {
    label: String,
    ensemble: EnsembleSpec,
    m: usize,
    rounds: usize,
    /// Total classical budget; `None` skips the classical sketch.
    classical_m: Option<usize>,
    include_exact: bool,
    /// Emit every IHS iterate rather than only the last.
    trace: bool,
}

fn pick<T: Clone>(over: &Option<Vec<T>>, default: Vec<T>) -> Vec<T> {
    over.clone().unwrap_or(default)
}

fn first_or<T: Copy>(over: &Option<Vec<T>>, default: T) -> T {
    over.as_ref().and_then(|v| v.first().copied()).unwrap_or(default)
}

fn gamma_label(g: f64) -> String {
    if g.fract() == 0.0 {
        format!("{}", g as i64)
    } else {
        format!("{g}")
    }
}

/// `1 + ⌈ln n⌉`.
fn log_rounds(n: usize) -> usize {
    1 + (n as f64).ln().ceil() as usize
}

fn plans(id: ExperimentId, o: &Overrides) -> Result<Vec<Plan>> {
    let full = o.full_scale;
    let sigma = o.sigma.unwrap_or(1.0);
    let trials = |desk: usize, full_count: usize| o.trials.unwrap_or(if full { full_count } else { desk });
    let mut out = Vec::new();
    let mut grid_index = 0u64;
    let mut ensemble = |family: Family, n: usize, trials: usize| {
        grid_index += 1;
        EnsembleSpec {
            family,
            n,
            sigma,
            trials,
            seed: derive_seed(o.seed, id as u64 + 100, grid_index),
        }
    };
    match id {
        ExperimentId::Fig1 => {
            let d = first_or(&o.d_values, 10);
            let default_n = if full {
                (0..=8).map(|k| 100usize << k).collect()
            } else {
                vec![100, 400, 1600, 6400]
            };
            let t = trials(30, 300);
            for n in pick(&o.n_values, default_n) {
                let m = o.m.unwrap_or(7 * d);
                let rounds = o.rounds.unwrap_or_else(|| log_rounds(n));
                out.push(Plan {
                    label: id.name().into(),
                    ensemble: ensemble(Family::Unconstrained { d }, n, t),
                    m,
                    rounds,
                    classical_m: Some(rounds * m),
                    include_exact: true,
                    trace: false,
                });
            }
        }
        ExperimentId::Fig2 => {
            let d = first_or(&o.d_values, 200);
            let n = first_or(&o.n_values, 6000);
            let t = trials(5, 20);
            for g in pick(&o.gammas, vec![4.0, 6.0, 8.0]) {
                out.push(Plan {
                    label: format!("{}/gamma={}", id.name(), gamma_label(g)),
                    ensemble: ensemble(Family::Unconstrained { d }, n, t),
                    m: o.m.unwrap_or((g * d as f64).ceil() as usize),
                    rounds: o.rounds.unwrap_or(10),
                    classical_m: None,
                    include_exact: false,
                    trace: true,
                });
            }
        }
        ExperimentId::Fig3 => {
            let default_d = if full {
                vec![16, 32, 64, 128, 256]
            } else {
                vec![16, 32, 64]
            };
            let t = trials(10, 20);
            for d in pick(&o.d_values, default_d) {
                let m = o.m.unwrap_or(6 * d);
                let rounds = o.rounds.unwrap_or(4);
                out.push(Plan {
                    label: id.name().into(),
                    ensemble: ensemble(Family::Unconstrained { d }, 100 * d, t),
                    m,
                    rounds,
                    classical_m: Some(rounds * m),
                    include_exact: true,
                    trace: false,
                });
            }
        }
        ExperimentId::Fig4 => {
            let d = first_or(&o.d_values, 256);
            let n = first_or(&o.n_values, 8872);
            let s = 32.min(d);
            let w2 = WidthHint::Sparse { d, s }.squared_width()?;
            let t = trials(3, 20);
            for g in pick(&o.gammas, vec![2.0, 5.0, 25.0]) {
                out.push(Plan {
                    label: format!("{}/gamma={}", id.name(), gamma_label(g)),
                    ensemble: ensemble(Family::Sparse { d, s }, n, t),
                    m: o.m.unwrap_or((g * w2).ceil() as usize),
                    rounds: o.rounds.unwrap_or(10),
                    classical_m: None,
                    include_exact: false,
                    trace: true,
                });
            }
        }
        ExperimentId::Fig5 => {
            let default_d = if full {
                vec![16, 32, 64, 128, 256]
            } else {
                vec![16, 32, 64]
            };
            let g = first_or(&o.gammas, 4.0);
            let t = trials(10, 20);
            for d in pick(&o.d_values, default_d) {
                let s = ((2.0 * (d as f64).sqrt()).ceil() as usize).min(d);
                let w2 = WidthHint::Sparse { d, s }.squared_width()?;
                let n = (100.0 * w2).ceil() as usize;
                let m = o.m.unwrap_or((g * w2).ceil() as usize);
                let rounds = o.rounds.unwrap_or(4);
                out.push(Plan {
                    label: id.name().into(),
                    ensemble: ensemble(Family::Sparse { d, s }, n, t),
                    m,
                    rounds,
                    classical_m: Some(rounds * m),
                    include_exact: true,
                    trace: false,
                });
            }
        }
        ExperimentId::Fig6a => {
            let d1 = first_or(&o.d_values, 20);
            let default_n = if full {
                (1..=10).map(|k| 10 * k).collect()
            } else {
                vec![40, 80]
            };
            let t = trials(5, 20);
            for n in pick(&o.n_values, default_n) {
                let m = o.m.unwrap_or(60);
                let rounds = o.rounds.unwrap_or_else(|| log_rounds(n));
                out.push(Plan {
                    label: id.name().into(),
                    ensemble: ensemble(Family::LowRank { d1, d2: d1, r: 2.min(d1) }, n, t),
                    m,
                    rounds,
                    classical_m: Some(rounds * m),
                    include_exact: true,
                    trace: false,
                });
            }
        }
    }
    for p in &out {
        p.ensemble.validate()?;
        if p.m == 0 || p.rounds == 0 {
            return Err(Error::InvalidArgument(
                "sketch size and round count must be ≥ 1".into(),
            ));
        }
    }
    Ok(out)
}

/// Output of [`run_experiment`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub rows: Vec<ExperimentRow>,
    pub warnings: Vec<String>,
}

impl ExperimentOutput {
    pub fn failed_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.flag == RowFlag::Failed).count()
    }

    pub fn nonconverged_rows(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| r.flag == RowFlag::InnerNonconverged)
            .count()
    }
}

/// Runs every grid point and trial of `id`. Trials run in parallel but rows
/// come back in grid-then-trial order.
pub fn run_experiment(id: ExperimentId, overrides: &Overrides) -> Result<ExperimentOutput> {
    overrides.inner.validate()?;
    let plans = plans(id, overrides)?;
    let jobs: Vec<(usize, usize)> = plans
        .iter()
        .enumerate()
        .flat_map(|(i, p)| (0..p.ensemble.trials).map(move |t| (i, t)))
        .collect();
    let results: Vec<(Vec<ExperimentRow>, Option<String>)> = jobs
        .par_iter()
        .map(|&(i, t)| run_trial(&plans[i], t, overrides))
        .collect();
    let mut rows = Vec::new();
    let mut warnings: Vec<String> = Vec::new();
    for (r, w) in results {
        rows.extend(r);
        if let Some(w) = w {
            if !warnings.contains(&w) {
                warnings.push(w);
            }
        }
    }
    Ok(ExperimentOutput { rows, warnings })
}

fn run_trial(plan: &Plan, trial: usize, o: &Overrides) -> (Vec<ExperimentRow>, Option<String>) {
    let ens = &plan.ensemble;
    let base = |method: Method, iter: usize| ExperimentRow {
        experiment: plan.label.clone(),
        trial,
        n: ens.n,
        d: ens.family.dim(),
        method,
        iter,
        err_ls_semi: None,
        err_truth_semi: None,
        err_truth_l2: None,
        seconds: None,
        flag: RowFlag::Failed,
    };
    let failed_all = || {
        let mut rows = Vec::new();
        if plan.include_exact {
            rows.push(base(Method::Exact, 0));
        }
        if plan.classical_m.is_some() {
            rows.push(base(Method::Classical, 0));
        }
        if plan.trace {
            rows.extend((0..=plan.rounds).map(|t| base(Method::Ihs, t)));
        } else {
            rows.push(base(Method::Ihs, plan.rounds));
        }
        rows
    };
    let Ok(problem) = ens.generate(trial) else {
        return (failed_all(), None);
    };
    let timed = |secs: f64| o.timings.then_some(secs);
    let truth = problem.truth().expect("generated problems carry a truth").to_vec();
    let fill = |row: &mut ExperimentRow, x: &[f64], x_ls: &[f64]| {
        row.err_ls_semi = problem.seminorm(x, x_ls).ok();
        row.err_truth_semi = problem.seminorm(x, &truth).ok();
        row.err_truth_l2 = Some(norm2(&sub_vec(x, &truth)));
    };

    let started = Instant::now();
    let exact = match solve_exact(&problem, &o.inner) {
        Ok(e) => e,
        Err(_) => return (failed_all(), None),
    };
    let exact_secs = started.elapsed().as_secs_f64();
    let x_ls = exact.x.clone();
    let mut rows = Vec::new();
    let mut warning = None;

    if plan.include_exact {
        let mut row = base(Method::Exact, 0);
        fill(&mut row, &x_ls, &x_ls);
        row.seconds = timed(exact_secs);
        row.flag = if exact.converged { RowFlag::Ok } else { RowFlag::InnerNonconverged };
        rows.push(row);
    }

    if let Some(big_m) = plan.classical_m {
        let spec = SketchSpec::new(o.sketch, big_m, derive_seed(ens.seed, TAG_CLASSICAL, trial as u64));
        let mut row = base(Method::Classical, 0);
        let started = Instant::now();
        if let Ok(est) = classical_sketch_solve(&problem, &spec, &o.inner) {
            fill(&mut row, &est.x, &x_ls);
            row.seconds = timed(started.elapsed().as_secs_f64());
            row.flag = if est.converged { RowFlag::Ok } else { RowFlag::InnerNonconverged };
            warning = warning.or(est.warning);
        }
        rows.push(row);
    }

    let spec = SketchSpec::new(o.sketch, plan.m, derive_seed(ens.seed, TAG_IHS, trial as u64));
    let mut cfg = IhsConfig::new(spec, plan.rounds);
    cfg.inner = o.inner;
    match ihs_solve(&problem, &cfg, Some(&x_ls)) {
        Ok(rep) => {
            warning = warning.or_else(|| rep.warnings.first().cloned());
            let first = if plan.trace { 0 } else { plan.rounds };
            for t in first..=plan.rounds {
                let mut row = base(Method::Ihs, t);
                fill(&mut row, &rep.iterates[t], &x_ls);
                row.seconds = timed(rep.per_round_seconds[..t].iter().sum());
                row.flag = if rep.rounds[..t].iter().all(|r| r.converged) {
                    RowFlag::Ok
                } else {
                    RowFlag::InnerNonconverged
                };
                rows.push(row);
            }
        }
        Err(_) => {
            let first = if plan.trace { 0 } else { plan.rounds };
            rows.extend((first..=plan.rounds).map(|t| base(Method::Ihs, t)));
        }
    }
    (rows, warning)
}

/// Single Hessian-sketch run on one generated problem; the building block of
/// the Hessian-sketch accuracy check.
pub fn hessian_trial(ens: &EnsembleSpec, m: usize, kind: SketchKind, trial: usize, ctl: &SolverControls) -> Result<(f64, f64)> {
    let problem = ens.generate(trial)?;
    let x_ls = solve_exact(&problem, ctl)?.x;
    let spec = SketchSpec::new(kind, m, derive_seed(ens.seed, TAG_HESSIAN, trial as u64));
    let x = hessian_sketch_solve(&problem, &spec, ctl)?.x;
    let zero = vec![0.0; problem.dim()];
    Ok((problem.seminorm(&x, &x_ls)?, problem.seminorm(&x_ls, &zero)?))
}

/// Mean of a per-row quantity grouped by `(experiment, n, d, method, iter)`,
/// in first-appearance order, skipping failed rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryLine {
    pub experiment: String,
    pub n: usize,
    pub d: usize,
    pub method: Method,
    pub iter: usize,
    pub trials: usize,
    pub failures: usize,
    pub mean_err_truth_semi: f64,
    pub mean_err_ls_semi: f64,
}

pub fn summarize(rows: &[ExperimentRow]) -> Vec<SummaryLine> {
    let mut out: Vec<SummaryLine> = Vec::new();
    let mut sums: Vec<(f64, f64, usize)> = Vec::new();
    for r in rows {
        let idx = out.iter().position(|s| {
            s.experiment == r.experiment && s.n == r.n && s.d == r.d && s.method == r.method && s.iter == r.iter
        });
        let idx = idx.unwrap_or_else(|| {
            out.push(SummaryLine {
                experiment: r.experiment.clone(),
                n: r.n,
                d: r.d,
                method: r.method,
                iter: r.iter,
                trials: 0,
                failures: 0,
                mean_err_truth_semi: f64::NAN,
                mean_err_ls_semi: f64::NAN,
            });
            sums.push((0.0, 0.0, 0));
            out.len() - 1
        });
        out[idx].trials += 1;
        match (r.flag, r.err_truth_semi, r.err_ls_semi) {
            (RowFlag::Failed, _, _) | (_, None, _) | (_, _, None) => out[idx].failures += 1,
            (_, Some(t), Some(l)) => {
                sums[idx].0 += t;
                sums[idx].1 += l;
                sums[idx].2 += 1;
            }
        }
    }
    for (line, (t, l, k)) in out.iter_mut().zip(sums) {
        if k > 0 {
            line.mean_err_truth_semi = t / k as f64;
            line.mean_err_ls_semi = l / k as f64;
        }
    }
    out
}

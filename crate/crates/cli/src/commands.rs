use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use ihskit::constraints::ConstraintSet;
use ihskit::experiments::{
    gen_lowrank, gen_sparse, gen_unconstrained, run_experiment, summarize, write_rows_csv,
    ExperimentId, Overrides,
};
use ihskit::ihs::{
    classical_sketch_solve, hessian_sketch_solve, ihs_solve, recommend_iterations,
    recommend_sketch_size, solve_exact, Certificate, Estimate, IhsConfig, IhsReport, LsProblem,
    WidthHint,
};
use ihskit::linalg::DenseMatrix;
use ihskit::sketch::{leverage_scores, verify_projection_condition_with, SketchKind, SketchSpec};
use ihskit::subsolver::SolverControls;
use serde::Serialize;

use crate::args::{
    ConstraintArgs, ConstraintKind, DiagnoseArgs, ExperimentArgs, Family, InnerArgs, MethodArg,
    ProblemArgs, ProjectArgs, SketchArgs, SolveArgs, VerifyArgs,
};
use crate::io::{format_matrix, read_matrix, write_atomic, write_json, CliError, CliResult};

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn controls(a: &InnerArgs) -> CliResult<SolverControls> {
    let ctl = SolverControls {
        tol: a.inner_tol,
        max_iter: a.inner_max_iter,
        acceleration: !a.no_acceleration,
    };
    ctl.validate()?;
    Ok(ctl)
}

fn build_set(c: &ConstraintArgs, kind: ConstraintKind, p: usize, k: usize) -> CliResult<ConstraintSet> {
    let radius = || c.radius.ok_or_else(|| usage("--radius is required for this constraint"));
    Ok(match kind {
        ConstraintKind::Unconstrained => ConstraintSet::Unconstrained,
        ConstraintKind::L1 => ConstraintSet::l1_ball(radius()?)?,
        ConstraintKind::Nuclear => ConstraintSet::nuclear_ball(radius()?, p, k)?,
        ConstraintKind::Simplex => ConstraintSet::Simplex,
        ConstraintKind::Box => {
            let (Some(lo), Some(hi)) = (c.lo, c.hi) else {
                return Err(usage("--lo and --hi are required for a box constraint"));
            };
            ConstraintSet::uniform_box(lo, hi, p * k)?
        }
    })
}

/// The problem together with the structural hint for sketch sizing.
struct Loaded {
    problem: LsProblem,
    hint: WidthHint,
}

fn load_problem(pa: &ProblemArgs, ca: &ConstraintArgs, seed: u64) -> CliResult<Loaded> {
    let mut problem = match (&pa.a, pa.generate) {
        (Some(a_path), _) => {
            let a = read_matrix(a_path)?;
            let y_path = pa.y.as_ref().ok_or_else(|| usage("--y is required with --a"))?;
            let y = read_matrix(y_path)?;
            if y.rows() != a.rows() {
                return Err(usage(format!(
                    "{} has {} rows but {} has {}",
                    y_path.display(),
                    y.rows(),
                    a_path.display(),
                    a.rows()
                )));
            }
            let k = y.cols();
            LsProblem::with_responses(a, y.to_col_major(), k, ConstraintSet::Unconstrained)?
        }
        (None, Some(family)) => {
            let n = pa.n.ok_or_else(|| usage("--n is required with --generate"))?;
            let d = pa.d.ok_or_else(|| usage("--d is required with --generate"))?;
            let sigma = pa.sigma.unwrap_or(1.0);
            let pseed = pa.problem_seed.unwrap_or(seed);
            match family {
                Family::Unconstrained => gen_unconstrained(n, d, sigma, pseed)?,
                Family::Sparse => {
                    let s = pa.sparsity.ok_or_else(|| usage("--sparsity is required for sparse problems"))?;
                    gen_sparse(n, d, s, sigma, pseed)?
                }
                Family::Lowrank => {
                    let r = pa.rank.ok_or_else(|| usage("--rank is required for low-rank problems"))?;
                    gen_lowrank(n, d, pa.d2.unwrap_or(d), r, sigma, pseed)?
                }
            }
        }
        (None, None) => return Err(usage("give either --a/--y or --generate")),
    };
    let (p, k) = (problem.p(), problem.responses());
    if let Some(kind) = ca.constraint {
        let set = build_set(ca, kind, p, k)?;
        let rebuilt = LsProblem::with_responses(problem.a().clone(), problem.y().to_vec(), k, set)?;
        problem = match (problem.truth(), problem.sigma()) {
            (Some(t), Some(s)) => rebuilt.with_truth(t.to_vec(), s)?,
            _ => rebuilt,
        };
    }
    let hint = match problem.set() {
        ConstraintSet::L1Ball { .. } => match pa.sparsity {
            Some(s) => WidthHint::Sparse { d: problem.dim(), s },
            None => WidthHint::Unconstrained { d: p },
        },
        ConstraintSet::NuclearBall { d1, d2, .. } => match pa.rank {
            Some(r) => WidthHint::LowRank { d1: *d1, d2: *d2, r },
            None => WidthHint::Unconstrained { d: p },
        },
        _ => WidthHint::Unconstrained { d: p },
    };
    Ok(Loaded { problem, hint })
}

fn sketch_size(sa: &SketchArgs, hint: WidthHint) -> CliResult<usize> {
    match sa.m {
        Some(0) => Err(usage("--m must be ≥ 1")),
        Some(m) => Ok(m),
        None => Ok(recommend_sketch_size(hint, sa.rho, sa.c0)?),
    }
}

/// Explicit `--rounds`, else the recommender when σ is known, else `1 + ⌈ln n⌉`.
fn round_count(sa: &SketchArgs, problem: &LsProblem, x_ls: Option<&[f64]>) -> CliResult<usize> {
    match sa.rounds {
        Some(0) => Err(usage("--rounds must be ≥ 1")),
        Some(r) => Ok(r),
        None => {
            let n = problem.n();
            match (problem.sigma(), x_ls) {
                (Some(sigma), Some(x)) if sigma > 0.0 => {
                    let semi = problem.seminorm(x, &vec![0.0; x.len()])?;
                    Ok(recommend_iterations(n, semi, sigma, sa.rho))
                }
                _ => Ok(1 + (n as f64).ln().ceil() as usize),
            }
        }
    }
}

fn read_reference(arg: &str, problem: &LsProblem, ctl: &SolverControls) -> CliResult<Vec<f64>> {
    if arg == "exact" {
        return Ok(solve_exact(problem, ctl)?.x);
    }
    let m = read_matrix(Path::new(arg))?;
    if m.rows() * m.cols() != problem.dim() || m.rows() != problem.p() {
        return Err(usage(format!(
            "{arg}: reference must be {} x {}, found {} x {}",
            problem.p(),
            problem.responses(),
            m.rows(),
            m.cols()
        )));
    }
    Ok(m.to_col_major())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

#[derive(Serialize)]
struct SolveReport<'a> {
    method: &'static str,
    n: usize,
    p: usize,
    responses: usize,
    constraint: &'a ConstraintSet,
    sketch: Option<SketchSpec>,
    rounds: Option<usize>,
    converged: bool,
    inner_iterations: usize,
    error_to_reference: Option<f64>,
    error_to_truth: Option<f64>,
    warnings: Vec<String>,
    /// Per-round trace; `per_round_seconds` is empty unless timings were asked for.
    ihs: Option<IhsReport>,
    seconds: Option<f64>,
}

const TRACE_HEADER: &str =
    "iter,err_ref_semi,err_truth_semi,inner_iterations,converged,z1,z2,ratio,seconds\n";

fn trace_ihs(rep: &IhsReport) -> String {
    let mut out = String::from(TRACE_HEADER);
    for t in 0..rep.iterates.len() {
        let pick = |v: &Option<Vec<f64>>| v.as_ref().map(|e| e[t]);
        let (inner, conv, cert, secs) = if t == 0 {
            (String::new(), String::new(), None, None)
        } else {
            let r = &rep.rounds[t - 1];
            (
                r.inner_iterations.to_string(),
                r.converged.to_string(),
                rep.certificates.as_ref().map(|c| c[t - 1]),
                rep.per_round_seconds.get(t - 1).copied(),
            )
        };
        let _ = writeln!(
            out,
            "{t},{},{},{inner},{conv},{},{},{},{}",
            fmt_opt(pick(&rep.errors_to_ls)),
            fmt_opt(pick(&rep.errors_to_truth)),
            fmt_opt(cert.map(|c: Certificate| c.z1)),
            fmt_opt(cert.map(|c| c.z2)),
            fmt_opt(cert.map(|c| c.ratio())),
            fmt_opt(secs),
        );
    }
    out
}

fn trace_single(est: &Estimate, err_ref: Option<f64>, err_truth: Option<f64>, secs: Option<f64>) -> String {
    format!(
        "{TRACE_HEADER}1,{},{},{},{},,,,{}\n",
        fmt_opt(err_ref),
        fmt_opt(err_truth),
        est.inner_iterations,
        est.converged,
        fmt_opt(secs)
    )
}

pub fn cmd_solve(a: &SolveArgs) -> CliResult<()> {
    let ctl = controls(&a.inner)?;
    let Loaded { problem, hint } = load_problem(&a.problem, &a.constraint, a.sketch.seed)?;
    let m = match a.method {
        MethodArg::Exact => None,
        _ => Some(sketch_size(&a.sketch, hint)?),
    };
    let reference = a
        .reference
        .as_deref()
        .map(|r| read_reference(r, &problem, &ctl))
        .transpose()?;
    let truth = problem.truth().map(<[f64]>::to_vec);
    let err = |x: &[f64], r: Option<&Vec<f64>>| -> CliResult<Option<f64>> {
        r.map(|r| problem.seminorm(x, r)).transpose().map_err(CliError::from)
    };

    let started = Instant::now();
    let mut rounds = None;
    let mut ihs = None;
    let mut sketch = None;
    let (x, converged, inner_iterations, warnings, trace) = match a.method {
        MethodArg::Exact | MethodArg::Classical | MethodArg::Hessian => {
            let est = match a.method {
                MethodArg::Exact => solve_exact(&problem, &ctl)?,
                method => {
                    let spec = SketchSpec::new(a.sketch.sketch, m.unwrap_or(1), a.sketch.seed);
                    sketch = Some(spec);
                    if method == MethodArg::Classical {
                        classical_sketch_solve(&problem, &spec, &ctl)?
                    } else {
                        hessian_sketch_solve(&problem, &spec, &ctl)?
                    }
                }
            };
            let secs = a.timings.then(|| started.elapsed().as_secs_f64());
            let trace = trace_single(&est, err(&est.x, reference.as_ref())?, err(&est.x, truth.as_ref())?, secs);
            (est.x.clone(), est.converged, est.inner_iterations, est.warning.into_iter().collect(), trace)
        }
        MethodArg::Ihs => {
            let need_ls = a.sketch.rounds.is_none() || a.certificates;
            let x_ls = match (&reference, need_ls) {
                (Some(r), _) => Some(r.clone()),
                (None, true) => Some(solve_exact(&problem, &ctl)?.x),
                (None, false) => None,
            };
            let n_rounds = round_count(&a.sketch, &problem, x_ls.as_deref())?;
            let spec = SketchSpec::new(a.sketch.sketch, m.unwrap_or(1), a.sketch.seed);
            sketch = Some(spec);
            rounds = Some(n_rounds);
            let mut cfg = IhsConfig::new(spec, n_rounds);
            cfg.rho = a.sketch.rho;
            cfg.inner = ctl;
            cfg.certificates = a.certificates;
            let mut rep = ihs_solve(&problem, &cfg, reference.as_deref().or(x_ls.as_deref()))?;
            if reference.is_none() {
                rep.errors_to_ls = None;
            }
            if !a.timings {
                rep.per_round_seconds.clear();
            }
            let trace = trace_ihs(&rep);
            let out = (
                rep.solution().to_vec(),
                rep.converged(),
                rep.rounds.iter().map(|r| r.inner_iterations).sum(),
                rep.warnings.clone(),
                trace,
            );
            ihs = Some(rep);
            out
        }
    };
    let seconds = a.timings.then(|| started.elapsed().as_secs_f64());
    let error_to_reference = err(&x, reference.as_ref())?;
    let report = SolveReport {
        method: match a.method {
            MethodArg::Exact => "exact",
            MethodArg::Classical => "classical",
            MethodArg::Hessian => "hessian",
            MethodArg::Ihs => "ihs",
        },
        n: problem.n(),
        p: problem.p(),
        responses: problem.responses(),
        constraint: problem.set(),
        sketch,
        rounds,
        converged,
        inner_iterations,
        error_to_reference,
        error_to_truth: err(&x, truth.as_ref())?,
        warnings,
        ihs,
        seconds,
    };

    fs::create_dir_all(&a.out).map_err(|e| CliError::Io(format!("{}: {e}", a.out.display())))?;
    let solution = DenseMatrix::from_col_major(problem.p(), problem.responses(), &x)?;
    write_atomic(&a.out.join("solution.csv"), format_matrix(&solution).as_bytes())?;
    write_json(&a.out.join("report.json"), &report)?;
    write_atomic(&a.out.join("trace.csv"), trace.as_bytes())?;

    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "method={} n={} p={} converged={}",
        report.method, report.n, report.p, report.converged
    );
    if let Some(e) = error_to_reference {
        println!("error_to_reference_semi={e:.16e}");
    }
    if let Some(e) = report.error_to_truth {
        println!("error_to_truth_semi={e:.16e}");
    }
    if !converged {
        return Err(CliError::Nonconverged(
            "the inner solver hit its iteration limit; outputs were written".into(),
        ));
    }
    Ok(())
}

pub fn cmd_experiment(a: &ExperimentArgs) -> CliResult<()> {
    let id: ExperimentId = a.id.parse()?;
    if a.m == Some(0) {
        return Err(usage("--m must be ≥ 1"));
    }
    let overrides = Overrides {
        seed: a.seed,
        trials: a.trials,
        n_values: a.n_values.clone(),
        d_values: a.d_values.clone(),
        gammas: a.gammas.clone(),
        rounds: a.rounds,
        m: a.m,
        sigma: a.sigma,
        sketch: a.sketch,
        full_scale: a.full_scale,
        inner: controls(&a.inner)?,
        timings: a.timings,
    };
    let out = run_experiment(id, &overrides)?;
    let mut csv = Vec::new();
    write_rows_csv(&out.rows, &mut csv).map_err(|e| CliError::Io(e.to_string()))?;
    let mut summary = String::new();
    for line in summarize(&out.rows) {
        let _ = writeln!(
            summary,
            "{} n={} d={} method={} iter={} trials={} failures={} mean_err_truth_semi={:.6e} mean_err_ls_semi={:.6e}",
            line.experiment,
            line.n,
            line.d,
            line.method,
            line.iter,
            line.trials,
            line.failures,
            line.mean_err_truth_semi,
            line.mean_err_ls_semi
        );
    }
    let _ = writeln!(
        summary,
        "rows={} failed={} inner_nonconverged={}",
        out.rows.len(),
        out.failed_rows(),
        out.nonconverged_rows()
    );
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    match &a.out {
        Some(path) => {
            write_atomic(path, &csv)?;
            print!("{summary}");
        }
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(&csv)
                .map_err(|e| CliError::Io(e.to_string()))?;
            eprint!("{summary}");
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct DiagnoseRow {
    round: usize,
    z1: f64,
    z2: f64,
    ratio: f64,
    degenerate: bool,
    err_before: f64,
    err_after: f64,
}

#[derive(Serialize)]
struct DiagnoseReport {
    sketch: SketchSpec,
    rounds: Vec<DiagnoseRow>,
    fraction_ratio_below_one: f64,
}

pub fn cmd_diagnose(a: &DiagnoseArgs) -> CliResult<()> {
    let ctl = controls(&a.inner)?;
    let Loaded { problem, hint } = load_problem(&a.problem, &a.constraint, a.sketch.seed)?;
    if !problem.set().is_unconstrained() {
        return Err(usage(format!(
            "unsupported: contraction certificates exist only for unconstrained problems, got a {} constraint",
            problem.set().name()
        )));
    }
    let m = sketch_size(&a.sketch, hint)?;
    let x_ls = solve_exact(&problem, &ctl)?.x;
    let rounds = round_count(&a.sketch, &problem, Some(&x_ls))?;
    let spec = SketchSpec::new(a.sketch.sketch, m, a.sketch.seed);
    let mut cfg = IhsConfig::new(spec, rounds);
    cfg.rho = a.sketch.rho;
    cfg.inner = ctl;
    cfg.certificates = true;
    let rep = ihs_solve(&problem, &cfg, Some(&x_ls))?;
    let certs = rep.certificates.as_ref().expect("certificates requested");
    let errs = rep.errors_to_ls.as_ref().expect("reference supplied");
    let rows: Vec<DiagnoseRow> = certs
        .iter()
        .enumerate()
        .map(|(t, c)| DiagnoseRow {
            round: t + 1,
            z1: c.z1,
            z2: c.z2,
            ratio: c.ratio(),
            degenerate: c.degenerate,
            err_before: errs[t],
            err_after: errs[t + 1],
        })
        .collect();
    let below = rows.iter().filter(|r| r.ratio < 1.0).count() as f64 / rows.len() as f64;
    println!("round,z1,z2,ratio,degenerate,err_before,err_after");
    for r in &rows {
        println!(
            "{},{:.16e},{:.16e},{:.16e},{},{:.16e},{:.16e}",
            r.round, r.z1, r.z2, r.ratio, r.degenerate, r.err_before, r.err_after
        );
    }
    eprintln!("fraction_ratio_below_one={below:.4}");
    if let Some(path) = &a.json {
        write_json(
            path,
            &DiagnoseReport {
                sketch: spec,
                rounds: rows,
                fraction_ratio_below_one: below,
            },
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct VerifyReport {
    kind: SketchKind,
    n: usize,
    m: usize,
    seed: u64,
    trials: usize,
    eta: f64,
    singular_draws: usize,
}

pub fn cmd_verify_condition(a: &VerifyArgs) -> CliResult<()> {
    if a.m == 0 {
        return Err(usage("--m must be ≥ 1"));
    }
    let leverage = match (a.kind, &a.a) {
        (SketchKind::RowsampleLeverage, None) => {
            return Err(usage("rowsample_leverage needs --a to compute leverage scores"))
        }
        (_, Some(path)) => {
            let mat = read_matrix(path)?;
            if mat.rows() != a.n {
                return Err(usage(format!(
                    "{} has {} rows but --n is {}",
                    path.display(),
                    mat.rows(),
                    a.n
                )));
            }
            Some(leverage_scores(&mat)?)
        }
        _ => None,
    };
    let spec = SketchSpec::new(a.kind, a.m, a.seed);
    let est = verify_projection_condition_with(&spec, a.n, a.trials, leverage.as_deref())?;
    println!(
        "kind={} n={} m={} trials={} eta={:.6} singular_draws={}",
        a.kind, a.n, a.m, est.trials, est.eta, est.singular_draws
    );
    if let Some(path) = &a.json {
        write_json(
            path,
            &VerifyReport {
                kind: a.kind,
                n: a.n,
                m: a.m,
                seed: a.seed,
                trials: est.trials,
                eta: est.eta,
                singular_draws: est.singular_draws,
            },
        )?;
    }
    Ok(())
}

pub fn cmd_project(a: &ProjectArgs) -> CliResult<()> {
    let point = match (&a.x, &a.point) {
        (Some(path), _) => read_matrix(path)?,
        (None, Some(v)) if !v.is_empty() => DenseMatrix::column_vector(v)?,
        _ => return Err(usage("give --x or a non-empty --point")),
    };
    let (rows, cols) = point.shape();
    let kind = a.constraint.constraint.unwrap_or(ConstraintKind::Unconstrained);
    let set = build_set(&a.constraint, kind, rows, cols)?;
    let projected = set.project(&point.to_col_major())?;
    let out = DenseMatrix::from_col_major(rows, cols, &projected)?;
    let text = format_matrix(&out);
    match &a.out {
        Some(path) => write_atomic(path, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

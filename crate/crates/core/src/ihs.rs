//! Least-squares solvers built on sketches: the unsketched reference, the
//! classical sketch `(SA, Sy)`, the Hessian sketch, and the iterative Hessian
//! sketch (IHS), plus sketch-size and round-count rules and the Z1/Z2
//! contraction certificates for unconstrained problems.
//!
//! Every objective is divided by `n`, so `f(x) = ‖Ax − y‖² / 2n` and the
//! sketched Hessians read `AᵀSᵀSA / (mn)`. Rescaling leaves minimizers alone.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::constraints::ConstraintSet;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, sub_vec, thin_svd, DenseMatrix};
use crate::sketch::{build_sketch, leverage_scores, SketchKind, SketchOperator, SketchSpec, RANK_TOL};
use crate::subsolver::{solve_constrained, solve_unconstrained, SketchedQuadratic, SolverControls};

/// `min_{X ∈ C} ‖AX − Y‖²_F / 2n` with `A: n x p` and `k` response columns.
/// With `k > 1` the variable `X` is `p x k`, flattened column-major, as are
/// `Y` and any truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsProblem {
    a: DenseMatrix,
    y: Vec<f64>,
    responses: usize,
    set: ConstraintSet,
    truth: Option<Vec<f64>>,
    sigma: Option<f64>,
}

impl LsProblem {
    pub fn new(a: DenseMatrix, y: Vec<f64>, set: ConstraintSet) -> Result<Self> {
        Self::with_responses(a, y, 1, set)
    }

    /// `y` holds an `n x responses` matrix, column-major.
    pub fn with_responses(
        a: DenseMatrix,
        y: Vec<f64>,
        responses: usize,
        set: ConstraintSet,
    ) -> Result<Self> {
        if a.rows() == 0 || a.cols() == 0 {
            return Err(Error::Empty);
        }
        if responses == 0 {
            return Err(Error::InvalidArgument("responses must be ≥ 1".into()));
        }
        if y.len() != a.rows() * responses {
            return Err(Error::DimensionMismatch {
                context: "response length vs rows of A",
                expected: a.rows() * responses,
                got: y.len(),
            });
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: i });
        }
        set.validate_for(a.cols() * responses)?;
        Ok(Self {
            a,
            y,
            responses,
            set,
            truth: None,
            sigma: None,
        })
    }

    pub fn with_truth(mut self, truth: Vec<f64>, sigma: f64) -> Result<Self> {
        if truth.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "ground-truth length",
                expected: self.dim(),
                got: truth.len(),
            });
        }
        self.truth = Some(truth);
        self.sigma = Some(sigma);
        Ok(self)
    }

    pub fn a(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn set(&self) -> &ConstraintSet {
        &self.set
    }

    pub fn truth(&self) -> Option<&[f64]> {
        self.truth.as_deref()
    }

    pub fn sigma(&self) -> Option<f64> {
        self.sigma
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }

    /// Columns of `A`.
    pub fn p(&self) -> usize {
        self.a.cols()
    }

    pub fn responses(&self) -> usize {
        self.responses
    }

    /// Length of the flattened variable, `p · responses`.
    pub fn dim(&self) -> usize {
        self.p() * self.responses
    }

    /// `AX`, flattened column-major.
    pub fn apply_a(&self, x: &[f64]) -> Result<Vec<f64>> {
        apply_left(&self.a, x, self.responses)
    }

    /// `AᵀR` for an `n x k` residual.
    pub fn apply_at(&self, r: &[f64]) -> Result<Vec<f64>> {
        if self.responses == 1 {
            return self.a.tr_matvec(r);
        }
        let rm = DenseMatrix::from_col_major(self.n(), self.responses, r)?;
        Ok(self.a.tr_matmul(&rm)?.to_col_major())
    }

    /// `Y` as an `n x k` matrix.
    pub fn y_matrix(&self) -> DenseMatrix {
        DenseMatrix::from_col_major(self.n(), self.responses, &self.y).expect("validated shape")
    }

    /// `f(x) = ‖Ax − y‖² / 2n`.
    pub fn objective(&self, x: &[f64]) -> Result<f64> {
        let r = sub_vec(&self.apply_a(x)?, &self.y);
        Ok(0.5 * dot(&r, &r) / self.n() as f64)
    }

    /// Prediction semi-norm `‖A(x − xref)‖ / √n`.
    pub fn seminorm(&self, x: &[f64], xref: &[f64]) -> Result<f64> {
        if x.len() != xref.len() {
            return Err(Error::DimensionMismatch {
                context: "semi-norm operands",
                expected: x.len(),
                got: xref.len(),
            });
        }
        Ok(norm2(&self.apply_a(&sub_vec(x, xref))?) / (self.n() as f64).sqrt())
    }

    /// `project(0)`; zero itself whenever the set contains it.
    pub fn origin(&self) -> Result<Vec<f64>> {
        self.set.project(&vec![0.0; self.dim()])
    }

    fn leverage_if_needed(&self, kind: SketchKind) -> Result<Option<Vec<f64>>> {
        if kind == SketchKind::RowsampleLeverage {
            Ok(Some(leverage_scores(&self.a)?))
        } else {
            Ok(None)
        }
    }
}

fn apply_left(a: &DenseMatrix, x: &[f64], k: usize) -> Result<Vec<f64>> {
    if k == 1 {
        return a.matvec(x);
    }
    let xm = DenseMatrix::from_col_major(a.cols(), k, x)?;
    Ok(a.matmul(&xm)?.to_col_major())
}

/// A solver output with the inner subsolver's status.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub x: Vec<f64>,
    pub converged: bool,
    pub inner_iterations: usize,
    /// Set when the sketch dimension exceeds `n`.
    pub warning: Option<String>,
}

fn minimize(q: &SketchedQuadratic, x0: &[f64], ctl: &SolverControls) -> Result<Estimate> {
    if q.set().is_unconstrained() {
        return Ok(Estimate {
            x: solve_unconstrained(q)?,
            converged: true,
            inner_iterations: 0,
            warning: None,
        });
    }
    let out = solve_constrained(q, x0, ctl)?;
    Ok(Estimate {
        x: out.x,
        converged: out.converged,
        inner_iterations: out.iterations,
        warning: None,
    })
}

/// `x_LS = argmin_{x ∈ C} ‖Ax − y‖² / 2n`.
pub fn solve_exact(problem: &LsProblem, ctl: &SolverControls) -> Result<Estimate> {
    let n = problem.n() as f64;
    let b = problem.a.scaled(1.0 / n.sqrt());
    let c: Vec<f64> = problem.apply_at(&problem.y)?.iter().map(|v| v / n).collect();
    let q = SketchedQuadratic::with_responses(b, c, problem.responses, problem.set.clone())?;
    match minimize(&q, &problem.origin()?, ctl) {
        Err(Error::SketchRankDeficient { d, .. }) => Err(Error::RankDeficient {
            rank: thin_svd(&problem.a)?.rank(RANK_TOL),
            cols: d,
        }),
        other => other,
    }
}

fn sketch_for(problem: &LsProblem, spec: &SketchSpec) -> Result<SketchOperator> {
    let lev = problem.leverage_if_needed(spec.kind)?;
    build_sketch(spec, problem.n(), lev.as_deref())
}

/// `argmin_{x ∈ C} ‖S(Ax − y)‖² / 2n` with one sketch of size `spec.m`.
pub fn classical_sketch_solve(
    problem: &LsProblem,
    spec: &SketchSpec,
    ctl: &SolverControls,
) -> Result<Estimate> {
    let op = sketch_for(problem, spec)?;
    classical_with_operator(problem, &op, ctl)
}

pub fn classical_with_operator(
    problem: &LsProblem,
    op: &SketchOperator,
    ctl: &SolverControls,
) -> Result<Estimate> {
    let scale = 1.0 / ((problem.n() * op.m()) as f64).sqrt();
    let sa = op.apply(&problem.a)?;
    let sy = op.apply(&problem.y_matrix())?;
    let b = sa.scaled(scale);
    let c = b.tr_matmul(&sy.scaled(scale))?.to_col_major();
    let q = SketchedQuadratic::with_responses(b, c, problem.responses, problem.set.clone())?;
    let mut est = minimize(&q, &problem.origin()?, ctl)?;
    est.warning = op.warning().map(str::to_owned);
    Ok(est)
}

/// `argmin_{x ∈ C} ‖SAx‖² / 2mn − ⟨Aᵀy, x⟩ / n`: only the quadratic term is
/// sketched.
pub fn hessian_sketch_solve(
    problem: &LsProblem,
    spec: &SketchSpec,
    ctl: &SolverControls,
) -> Result<Estimate> {
    let op = sketch_for(problem, spec)?;
    hessian_with_operator(problem, &op, ctl)
}

pub fn hessian_with_operator(
    problem: &LsProblem,
    op: &SketchOperator,
    ctl: &SolverControls,
) -> Result<Estimate> {
    let n = problem.n() as f64;
    let b = op.apply(&problem.a)?.scaled(1.0 / (op.m() as f64 * n).sqrt());
    let c: Vec<f64> = problem.apply_at(&problem.y)?.iter().map(|v| v / n).collect();
    let q = SketchedQuadratic::with_responses(b, c, problem.responses, problem.set.clone())?;
    let mut est = minimize(&q, &problem.origin()?, ctl)?;
    est.warning = op.warning().map(str::to_owned);
    Ok(est)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IhsConfig {
    /// Per-round sketch; round `t` draws stream `t` of `sketch.seed`.
    pub sketch: SketchSpec,
    pub rounds: usize,
    /// Target contraction, recorded for the recommenders.
    pub rho: f64,
    pub inner: SolverControls,
    /// Starting point; `project(0)` when absent.
    pub x0: Option<Vec<f64>>,
    /// Record Z1/Z2 per round (unconstrained problems only).
    pub certificates: bool,
}

impl IhsConfig {
    pub fn new(sketch: SketchSpec, rounds: usize) -> Self {
        Self {
            sketch,
            rounds,
            rho: 0.5,
            inner: SolverControls::default(),
            x0: None,
            certificates: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::InvalidArgument("IHS needs at least one round".into()));
        }
        if !(self.rho > 0.0 && self.rho <= 0.5) {
            return Err(Error::InvalidArgument(format!(
                "rho must lie in (0, 1/2], got {}",
                self.rho
            )));
        }
        if self.sketch.m == 0 {
            return Err(Error::InvalidArgument("sketch dimension m must be ≥ 1".into()));
        }
        self.inner.validate()
    }
}

/// Z1 and Z2 for one sketch and one error direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub z1: f64,
    pub z2: f64,
    /// The direction `A(x_LS − x)` was zero, so `Z2 = 0` by convention.
    pub degenerate: bool,
}

impl Certificate {
    pub fn ratio(&self) -> f64 {
        self.z2 / self.z1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundStats {
    pub inner_iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IhsReport {
    /// `x⁰, …, x^N`.
    pub iterates: Vec<Vec<f64>>,
    /// `‖x^t − x_LS‖_A` for `t = 0..=N`, when a reference was supplied.
    pub errors_to_ls: Option<Vec<f64>>,
    /// `‖x^t − x*‖_A` for `t = 0..=N`, when the problem carries a truth.
    pub errors_to_truth: Option<Vec<f64>>,
    /// Wall time of rounds `1..=N`.
    pub per_round_seconds: Vec<f64>,
    /// Certificates of rounds `1..=N`.
    pub certificates: Option<Vec<Certificate>>,
    pub rounds: Vec<RoundStats>,
    pub warnings: Vec<String>,
}

impl IhsReport {
    pub fn solution(&self) -> &[f64] {
        self.iterates.last().expect("at least x⁰")
    }

    pub fn converged(&self) -> bool {
        self.rounds.iter().all(|r| r.converged)
    }
}

/// Orthonormal basis of `range(A)` as `U = A V Λ^{-1/2}` from the Gram
/// eigendecomposition.
fn range_basis(a: &DenseMatrix) -> Result<DenseMatrix> {
    let g = a.gram();
    let eig = thin_svd(&g)?;
    let rank = eig.rank(1e-14);
    if rank < a.cols() {
        return Err(Error::RankDeficient {
            rank,
            cols: a.cols(),
        });
    }
    let inv_sqrt: Vec<f64> = eig.singular_values.iter().map(|l| 1.0 / l.sqrt()).collect();
    let w = DenseMatrix::from_fn(a.cols(), a.cols(), |i, j| eig.vt.get(j, i) * inv_sqrt[j]);
    a.matmul(&w)
}

/// `λ_min(UᵀSᵀSU/m)` and `‖Uᵀ(SᵀS/m − I)u‖_F` for the unit-Frobenius `n x k`
/// direction `u`, given `SU` and `Su`.
fn certificate_from(
    u_basis: &DenseMatrix,
    su: &DenseMatrix,
    dir: &DenseMatrix,
    sdir: &DenseMatrix,
    m: usize,
) -> Result<Certificate> {
    let m = m as f64;
    let z1 = *thin_svd(&su.gram().scaled(1.0 / m))?
        .singular_values
        .last()
        .expect("nonempty");
    let nrm = dir.frobenius_norm();
    if nrm == 0.0 {
        return Ok(Certificate {
            z1,
            z2: 0.0,
            degenerate: true,
        });
    }
    let sketched = su.tr_matmul(sdir)?.scaled(1.0 / (m * nrm));
    let plain = u_basis.tr_matmul(dir)?.scaled(1.0 / nrm);
    Ok(Certificate {
        z1,
        z2: sketched.sub(&plain)?.frobenius_norm(),
        degenerate: false,
    })
}

/// Z1 and Z2 of the Hessian sketch `op` for an unconstrained problem, with
/// `u = A x_ls / ‖A x_ls‖`. A zero `A x_ls` gives `Z2 = 0`, flagged.
pub fn contraction_certificates_unconstrained(
    a: &DenseMatrix,
    op: &SketchOperator,
    x_ls: &[f64],
) -> Result<Certificate> {
    let p = a.cols();
    if p == 0 || x_ls.len() % p != 0 || x_ls.is_empty() {
        return Err(Error::DimensionMismatch {
            context: "certificate direction length vs columns of A",
            expected: p,
            got: x_ls.len(),
        });
    }
    let k = x_ls.len() / p;
    let u_basis = range_basis(a)?;
    let dir = DenseMatrix::from_col_major(a.rows(), k, &apply_left(a, x_ls, k)?)?;
    let su = op.apply(&u_basis)?;
    let sdir = op.apply(&dir)?;
    certificate_from(&u_basis, &su, &dir, &sdir, op.m())
}

/// Runs `config.rounds` IHS rounds from `x⁰`, drawing a fresh sketch each
/// round. Round `t + 1` solves
/// `min_{x ∈ C} ‖S A(x − x^t)‖² / 2mn − ⟨Aᵀ(y − Ax^t), x⟩ / n`.
pub fn ihs_solve(
    problem: &LsProblem,
    config: &IhsConfig,
    reference: Option<&[f64]>,
) -> Result<IhsReport> {
    config.validate()?;
    let dim = problem.dim();
    if let Some(r) = reference {
        if r.len() != dim {
            return Err(Error::DimensionMismatch {
                context: "reference solution length",
                expected: dim,
                got: r.len(),
            });
        }
    }
    if config.certificates && !problem.set.is_unconstrained() {
        return Err(Error::Unsupported(
            "contraction certificates are only available for unconstrained problems".into(),
        ));
    }
    let x0 = match &config.x0 {
        Some(x0) if x0.len() != dim => {
            return Err(Error::DimensionMismatch {
                context: "IHS starting point",
                expected: dim,
                got: x0.len(),
            })
        }
        Some(x0) => problem.set.project(x0)?,
        None => problem.origin()?,
    };

    let n = problem.n();
    let k = problem.responses;
    let lev = problem.leverage_if_needed(config.sketch.kind)?;
    // Certificates need x_LS; compute it here when not supplied.
    let cert_ref = if config.certificates {
        Some(match reference {
            Some(r) => r.to_vec(),
            None => solve_exact(problem, &config.inner)?.x,
        })
    } else {
        None
    };
    let u_basis = if config.certificates {
        Some(range_basis(&problem.a)?)
    } else {
        None
    };

    let mut iterates = vec![x0];
    let mut seconds = Vec::with_capacity(config.rounds);
    let mut certs = Vec::new();
    let mut rounds = Vec::with_capacity(config.rounds);
    let mut warnings = Vec::new();
    for t in 0..config.rounds {
        let started = Instant::now();
        let xt = iterates.last().expect("nonempty");
        let op = build_sketch(&config.sketch.with_round(t as u64 + 1), n, lev.as_deref())?;
        if t == 0 {
            if let Some(w) = op.warning() {
                warnings.push(w.to_owned());
            }
        }
        let b = op.apply(&problem.a)?.scaled(1.0 / ((op.m() * n) as f64).sqrt());
        let resid = sub_vec(&problem.y, &problem.apply_a(xt)?);
        let grad: Vec<f64> = problem.apply_at(&resid)?.iter().map(|v| v / n as f64).collect();

        let (next, stats) = if problem.set.is_unconstrained() {
            let q = SketchedQuadratic::with_responses(b, grad, k, ConstraintSet::Unconstrained)?;
            let delta = solve_unconstrained(&q)?;
            let next: Vec<f64> = xt.iter().zip(&delta).map(|(x, d)| x + d).collect();
            (
                next,
                RoundStats {
                    inner_iterations: 0,
                    converged: true,
                },
            )
        } else {
            let bx = apply_left(&b, xt, k)?;
            let mut c = if k == 1 {
                b.tr_matvec(&bx)?
            } else {
                let bxm = DenseMatrix::from_col_major(b.rows(), k, &bx)?;
                b.tr_matmul(&bxm)?.to_col_major()
            };
            c.iter_mut().zip(&grad).for_each(|(ci, gi)| *ci += gi);
            let q = SketchedQuadratic::with_responses(b, c, k, problem.set.clone())?;
            let out = solve_constrained(&q, xt, &config.inner)?;
            (
                out.x,
                RoundStats {
                    inner_iterations: out.iterations,
                    converged: out.converged,
                },
            )
        };

        if let (Some(x_ls), Some(ub)) = (&cert_ref, &u_basis) {
            let dir_x = sub_vec(x_ls, xt);
            let dir = DenseMatrix::from_col_major(n, k, &problem.apply_a(&dir_x)?)?;
            let su = op.apply(ub)?;
            let sdir = op.apply(&dir)?;
            certs.push(certificate_from(ub, &su, &dir, &sdir, op.m())?);
        }

        seconds.push(started.elapsed().as_secs_f64());
        rounds.push(stats);
        iterates.push(next);
    }

    let errors_to = |target: &[f64]| -> Result<Vec<f64>> {
        iterates.iter().map(|x| problem.seminorm(x, target)).collect()
    };
    let errors_to_ls = reference.map(errors_to).transpose()?;
    let errors_to_truth = problem.truth().map(errors_to).transpose()?;
    Ok(IhsReport {
        errors_to_ls,
        errors_to_truth,
        iterates,
        per_round_seconds: seconds,
        certificates: config.certificates.then_some(certs),
        rounds,
        warnings,
    })
}

/// Structural information that fixes the squared Gaussian width `W²` of the
/// tangent cone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum WidthHint {
    /// `W² = d`.
    Unconstrained { d: usize },
    /// `W² = s log(e d / s)`.
    Sparse { d: usize, s: usize },
    /// `W² = r (d1 + d2)`.
    LowRank { d1: usize, d2: usize, r: usize },
}

impl WidthHint {
    pub fn squared_width(&self) -> Result<f64> {
        match *self {
            WidthHint::Unconstrained { d } if d >= 1 => Ok(d as f64),
            WidthHint::Sparse { d, s } if s >= 1 && s <= d => {
                let (d, s) = (d as f64, s as f64);
                Ok(s * (std::f64::consts::E * d / s).ln())
            }
            WidthHint::LowRank { d1, d2, r } if r >= 1 && r <= d1.min(d2) => {
                Ok((r * (d1 + d2)) as f64)
            }
            other => Err(Error::InvalidArgument(format!(
                "width hint {other:?} needs d ≥ 1 and a sparsity/rank hint between 1 and the dimension"
            ))),
        }
    }
}

/// Slack so that products landing exactly on an integer are not pushed up by
/// rounding noise.
const CEIL_SLACK: f64 = 1e-12;

fn ceil_with_slack(v: f64) -> f64 {
    (v * (1.0 - CEIL_SLACK)).ceil()
}

/// `m = ⌈(c0 / ρ²) W²⌉`.
pub fn recommend_sketch_size(hint: WidthHint, rho: f64, c0: f64) -> Result<usize> {
    if !(rho > 0.0 && rho <= 0.5) {
        return Err(Error::InvalidArgument(format!("rho must lie in (0, 1/2], got {rho}")));
    }
    if !(c0 > 0.0 && c0.is_finite()) {
        return Err(Error::InvalidArgument(format!("c0 must be positive, got {c0}")));
    }
    let m = ceil_with_slack(c0 / (rho * rho) * hint.squared_width()?);
    Ok((m as usize).max(1))
}

pub const DEFAULT_C0: f64 = 1.5;

/// `N = 1 + ⌈log(√n ‖x_LS‖_A / σ) / log(1/ρ)⌉`, at least 1.
pub fn recommend_iterations(n: usize, semi_norm_ls: f64, sigma: f64, rho: f64) -> usize {
    let arg = (n as f64).sqrt() * semi_norm_ls / sigma;
    if !(arg > 1.0) || !(rho > 0.0 && rho < 1.0) {
        return 1;
    }
    let ratio = arg.ln() / (1.0 / rho).ln();
    1 + ceil_with_slack(ratio).max(0.0) as usize
}

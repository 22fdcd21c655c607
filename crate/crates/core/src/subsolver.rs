//! Minimization of the sketched quadratic `g(x) = ½‖Bx‖² − ⟨c, x⟩` over a
//! constraint set: a direct solve when unconstrained, projected gradient
//! (accelerated with function-value restart) otherwise.
//!
//! The variable may be a `p x k` matrix flattened column-major, in which case
//! `B` acts on each of its `k` columns.

use serde::{Deserialize, Serialize};

use crate::constraints::ConstraintSet;
use crate::error::{Error, Result};
use crate::linalg::{
    dot, estimate_opnorm_sq, estimate_sym_opnorm, norm2, sub_vec, Cholesky, DenseMatrix,
};

const POWER_ITERS: usize = 100;
const POWER_SEED: u64 = 0x51_7e_5b;

#[derive(Debug, Clone, PartialEq)]
pub struct SketchedQuadratic {
    b: DenseMatrix,
    c: Vec<f64>,
    responses: usize,
    set: ConstraintSet,
}

impl SketchedQuadratic {
    pub fn new(b: DenseMatrix, c: Vec<f64>, set: ConstraintSet) -> Result<Self> {
        Self::with_responses(b, c, 1, set)
    }

    /// `c` holds a `B.cols x responses` matrix, column-major.
    pub fn with_responses(
        b: DenseMatrix,
        c: Vec<f64>,
        responses: usize,
        set: ConstraintSet,
    ) -> Result<Self> {
        if responses == 0 {
            return Err(Error::InvalidArgument("responses must be ≥ 1".into()));
        }
        if b.cols() * responses != c.len() {
            return Err(Error::DimensionMismatch {
                context: "sketched quadratic linear term",
                expected: b.cols() * responses,
                got: c.len(),
            });
        }
        set.validate_for(c.len())?;
        Ok(Self {
            b,
            c,
            responses,
            set,
        })
    }

    pub fn b(&self) -> &DenseMatrix {
        &self.b
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn set(&self) -> &ConstraintSet {
        &self.set
    }

    pub fn responses(&self) -> usize {
        self.responses
    }

    /// Length of the flattened variable.
    pub fn dim(&self) -> usize {
        self.c.len()
    }

    /// `g(x)`.
    pub fn objective(&self, x: &[f64]) -> Result<f64> {
        let bx = self.apply_b(x)?;
        Ok(0.5 * dot(&bx, &bx) - dot(&self.c, x))
    }

    /// `∇g(x) = BᵀBx − c`.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let bx = self.apply_b(x)?;
        let mut g = self.apply_bt(&bx)?;
        g.iter_mut().zip(&self.c).for_each(|(gi, ci)| *gi -= ci);
        Ok(g)
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "sketched quadratic variable",
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    fn apply_b(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x)?;
        if self.responses == 1 {
            return self.b.matvec(x);
        }
        let xm = DenseMatrix::from_col_major(self.b.cols(), self.responses, x)?;
        Ok(self.b.matmul(&xm)?.to_col_major())
    }

    fn apply_bt(&self, v: &[f64]) -> Result<Vec<f64>> {
        if self.responses == 1 {
            return self.b.tr_matvec(v);
        }
        let vm = DenseMatrix::from_col_major(self.b.rows(), self.responses, v)?;
        Ok(self.b.tr_matmul(&vm)?.to_col_major())
    }
}

/// Applies `BᵀB` through whichever of the Gram matrix or two products is
/// cheaper.
struct HessianOp<'a> {
    q: &'a SketchedQuadratic,
    gram: Option<DenseMatrix>,
}

impl<'a> HessianOp<'a> {
    fn new(q: &'a SketchedQuadratic) -> Self {
        let gram = (q.b.rows() >= q.b.cols()).then(|| q.b.gram());
        Self { q, gram }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        match &self.gram {
            Some(g) if self.q.responses == 1 => g.matvec(x).expect("length checked"),
            Some(g) => {
                let xm = DenseMatrix::from_col_major(g.cols(), self.q.responses, x)
                    .expect("length checked");
                g.matmul(&xm).expect("shapes agree").to_col_major()
            }
            None => {
                let bx = self.q.apply_b(x).expect("length checked");
                self.q.apply_bt(&bx).expect("length checked")
            }
        }
    }

    fn lipschitz(&self) -> f64 {
        let l = match &self.gram {
            Some(g) => estimate_sym_opnorm(g, POWER_ITERS, POWER_SEED),
            None => estimate_opnorm_sq(&self.q.b, POWER_ITERS, POWER_SEED),
        };
        if l > 0.0 {
            l
        } else {
            1.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverControls {
    /// Gradient-mapping tolerance, relative to `max(1, ‖c‖₂)`.
    pub tol: f64,
    pub max_iter: usize,
    pub acceleration: bool,
}

impl Default for SolverControls {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 20_000,
            acceleration: true,
        }
    }
}

impl SolverControls {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "inner tolerance must be finite and > 0, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("inner max_iter must be ≥ 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsolveOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// `L‖x − P(x − ∇g(x)/L)‖₂` at the returned point.
    pub grad_map_norm: f64,
}

/// Solves `(BᵀB) x = c` column by column.
pub fn solve_unconstrained(q: &SketchedQuadratic) -> Result<Vec<f64>> {
    let g = q.b.gram();
    let chol = Cholesky::factor(&g).map_err(|_| Error::SketchRankDeficient {
        m: q.b.rows(),
        d: q.b.cols(),
    })?;
    let p = q.b.cols();
    let mut x = Vec::with_capacity(q.dim());
    for j in 0..q.responses {
        x.extend(chol.solve(&q.c[j * p..(j + 1) * p])?);
    }
    Ok(x)
}

/// Projected gradient from `x0` (projected first if infeasible).
pub fn solve_constrained(
    q: &SketchedQuadratic,
    x0: &[f64],
    ctl: &SolverControls,
) -> Result<SubsolveOutcome> {
    ctl.validate()?;
    q.check_len(x0)?;
    let set = &q.set;
    let hess = HessianOp::new(q);
    let mut lip = hess.lipschitz();
    let threshold = ctl.tol * norm2(&q.c).max(1.0);
    let value = |x: &[f64], hx: &[f64]| 0.5 * dot(x, hx) - dot(&q.c, x);
    let grad = |hx: &[f64]| -> Vec<f64> { hx.iter().zip(&q.c).map(|(h, c)| h - c).collect() };
    let step = |x: &[f64], g: &[f64], lip: f64| -> Result<Vec<f64>> {
        let trial: Vec<f64> = x.iter().zip(g).map(|(xi, gi)| xi - gi / lip).collect();
        set.project(&trial)
    };

    let mut x = set.project(x0)?;
    let mut hx = hess.apply(&x);
    let mut fx = value(&x, &hx);
    // Extrapolated point y and its Hessian image; y = x after a restart.
    let mut y = x.clone();
    let mut hy = hx.clone();
    let mut t = 1.0f64;

    let mut iterations = 0;
    while iterations < ctl.max_iter {
        let gx = grad(&hx);
        let mapped = step(&x, &gx, lip)?;
        let grad_map_norm = lip * norm2(&sub_vec(&x, &mapped));
        if grad_map_norm <= threshold {
            return Ok(SubsolveOutcome {
                x,
                iterations,
                converged: true,
                grad_map_norm,
            });
        }
        iterations += 1;

        let gy = grad(&hy);
        let fy = value(&y, &hy);
        let z = step(&y, &gy, lip)?;
        let hz = hess.apply(&z);
        let fz = value(&z, &hz);
        let dz: Vec<f64> = z.iter().zip(&y).map(|(a, b)| a - b).collect();
        let model = fy + dot(&gy, &dz) + 0.5 * lip * dot(&dz, &dz);
        if fz > model + 1e-14 * (1.0 + fy.abs()) {
            // Lipschitz estimate too small: retry with a larger constant.
            lip *= 2.0;
            continue;
        }
        if ctl.acceleration && t > 1.0 && fz > fx {
            // Momentum overshot; restart from the last accepted iterate.
            t = 1.0;
            y.clone_from(&x);
            hy.clone_from(&hx);
            continue;
        }
        if ctl.acceleration {
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let beta = (t - 1.0) / t_next;
            y = z.iter().zip(&x).map(|(zi, xi)| zi + beta * (zi - xi)).collect();
            hy = hz.iter().zip(&hx).map(|(a, b)| a + beta * (a - b)).collect();
            t = t_next;
        } else {
            y.clone_from(&z);
            hy.clone_from(&hz);
        }
        x = z;
        hx = hz;
        fx = fz;
    }
    let gx = grad(&hx);
    let mapped = step(&x, &gx, lip)?;
    let grad_map_norm = lip * norm2(&sub_vec(&x, &mapped));
    Ok(SubsolveOutcome {
        converged: grad_map_norm <= threshold,
        x,
        iterations,
        grad_map_norm,
    })
}

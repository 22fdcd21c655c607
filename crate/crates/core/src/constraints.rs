//! Convex constraint sets and exact Euclidean projections onto them.
//!
//! Matrix variables (`NuclearBall`) are flattened column-major: entry
//! `(i, j)` of a `d1 x d2` matrix sits at index `i + j * d1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{thin_svd, DenseMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ConstraintSet {
    Unconstrained,
    /// `{x : ‖x‖₁ ≤ radius}`.
    #[serde(rename = "l1")]
    L1Ball { radius: f64 },
    /// `{X ∈ R^{d1×d2} : ‖X‖_nuc ≤ radius}`.
    #[serde(rename = "nuclear")]
    NuclearBall { radius: f64, d1: usize, d2: usize },
    /// Unit simplex `{x ≥ 0 : Σx = 1}`.
    Simplex,
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl ConstraintSet {
    pub fn l1_ball(radius: f64) -> Result<Self> {
        let set = ConstraintSet::L1Ball { radius };
        set.check()?;
        Ok(set)
    }

    pub fn nuclear_ball(radius: f64, d1: usize, d2: usize) -> Result<Self> {
        let set = ConstraintSet::NuclearBall { radius, d1, d2 };
        set.check()?;
        Ok(set)
    }

    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let set = ConstraintSet::Box { lo, hi };
        set.check()?;
        Ok(set)
    }

    /// Same bounds on each of `d` coordinates.
    pub fn uniform_box(lo: f64, hi: f64, d: usize) -> Result<Self> {
        Self::boxed(vec![lo; d], vec![hi; d])
    }

    pub fn name(&self) -> &'static str {
        match self {
            ConstraintSet::Unconstrained => "unconstrained",
            ConstraintSet::L1Ball { .. } => "l1",
            ConstraintSet::NuclearBall { .. } => "nuclear",
            ConstraintSet::Simplex => "simplex",
            ConstraintSet::Box { .. } => "box",
        }
    }

    pub fn is_unconstrained(&self) -> bool {
        matches!(self, ConstraintSet::Unconstrained)
    }

    /// Vector length fixed by the set itself, if any.
    pub fn ambient_dim(&self) -> Option<usize> {
        match self {
            ConstraintSet::NuclearBall { d1, d2, .. } => Some(d1 * d2),
            ConstraintSet::Box { lo, .. } => Some(lo.len()),
            _ => None,
        }
    }

    /// Checks the descriptor's own invariants.
    pub fn check(&self) -> Result<()> {
        let bad_radius = |r: f64| {
            Err(Error::InvalidArgument(format!(
                "constraint radius must be finite and > 0, got {r}"
            )))
        };
        match self {
            ConstraintSet::L1Ball { radius } if !(radius.is_finite() && *radius > 0.0) => {
                bad_radius(*radius)
            }
            ConstraintSet::NuclearBall { radius, d1, d2 } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return bad_radius(*radius);
                }
                if *d1 == 0 || *d2 == 0 {
                    return Err(Error::InvalidArgument(format!(
                        "nuclear ball shape must be positive, got {d1}x{d2}"
                    )));
                }
                Ok(())
            }
            ConstraintSet::Box { lo, hi } => {
                if lo.len() != hi.len() {
                    return Err(Error::DimensionMismatch {
                        context: "box bounds (hi vs lo)",
                        expected: lo.len(),
                        got: hi.len(),
                    });
                }
                if let Some(i) = (0..lo.len()).find(|&i| !(lo[i] <= hi[i]) || lo[i].is_nan()) {
                    return Err(Error::InvalidArgument(format!(
                        "box bound {i} has lo = {} > hi = {}",
                        lo[i], hi[i]
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Checks invariants and that vectors of length `d` live in the set's space.
    pub fn validate_for(&self, d: usize) -> Result<()> {
        self.check()?;
        match self.ambient_dim() {
            Some(k) if k != d => Err(Error::DimensionMismatch {
                context: "constraint ambient dimension",
                expected: k,
                got: d,
            }),
            _ => Ok(()),
        }
    }

    /// `argmin_{z ∈ C} ‖z − x‖₂`.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.validate_for(x.len())?;
        match self {
            ConstraintSet::Unconstrained => Ok(x.to_vec()),
            ConstraintSet::L1Ball { radius } => Ok(project_l1(x, *radius)),
            ConstraintSet::Simplex => {
                if x.is_empty() {
                    return Err(Error::Empty);
                }
                Ok(project_simplex(x, 1.0))
            }
            ConstraintSet::Box { lo, hi } => Ok(x
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(v, (l, h))| v.clamp(*l, *h))
                .collect()),
            ConstraintSet::NuclearBall { radius, d1, d2 } => project_nuclear(x, *radius, *d1, *d2),
        }
    }

    /// Whether the constraint functional at `x` is within `tol` of its bound.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        if self.validate_for(x.len()).is_err() {
            return false;
        }
        match self {
            ConstraintSet::Unconstrained => true,
            ConstraintSet::L1Ball { radius } => l1_norm(x) <= radius + tol,
            ConstraintSet::Simplex => {
                !x.is_empty()
                    && x.iter().all(|&v| v >= -tol)
                    && (x.iter().sum::<f64>() - 1.0).abs() <= tol
            }
            ConstraintSet::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (l, h))| *v >= l - tol && *v <= h + tol),
            ConstraintSet::NuclearBall { radius, d1, d2 } => match nuclear_norm(x, *d1, *d2) {
                Ok(nrm) => nrm <= radius + tol,
                Err(_) => false,
            },
        }
    }
}

pub fn l1_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

/// Nuclear norm of the column-major `d1 x d2` matrix stored in `x`.
pub fn nuclear_norm(x: &[f64], d1: usize, d2: usize) -> Result<f64> {
    let m = DenseMatrix::from_col_major(d1, d2, x)?;
    Ok(thin_svd(&m)?.singular_values.iter().sum())
}

/// Threshold `θ` with `Σ max(vᵢ − θ, 0) = target`, from values sorted
/// descending (ties resolved by original index before sorting).
fn simplex_threshold(sorted_desc: &[f64], target: f64) -> f64 {
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted_desc.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - target) / (j + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    theta
}

fn sorted_desc(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

fn project_l1(x: &[f64], radius: f64) -> Vec<f64> {
    if l1_norm(x) <= radius {
        return x.to_vec();
    }
    let mags = sorted_desc(x.iter().map(|v| v.abs()).collect());
    let theta = simplex_threshold(&mags, radius);
    x.iter()
        .map(|&v| v.signum() * (v.abs() - theta).max(0.0))
        .collect()
}

/// Projection onto `{x ≥ 0 : Σx = total}`.
fn project_simplex(x: &[f64], total: f64) -> Vec<f64> {
    let sorted = sorted_desc(x.to_vec());
    let theta = simplex_threshold(&sorted, total);
    x.iter().map(|&v| (v - theta).max(0.0)).collect()
}

fn project_nuclear(x: &[f64], radius: f64, d1: usize, d2: usize) -> Result<Vec<f64>> {
    let m = DenseMatrix::from_col_major(d1, d2, x)?;
    let svd = thin_svd(&m)?;
    if svd.singular_values.iter().sum::<f64>() <= radius {
        return Ok(x.to_vec());
    }
    let shrunk = project_l1(&svd.singular_values, radius);
    Ok(svd.reassemble(&shrunk).to_col_major())
}

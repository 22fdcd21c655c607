//! Thin SVD by one-sided (Hestenes) Jacobi rotations.
//!
//! Columns of the working copy are rotated pairwise until mutually orthogonal;
//! their norms are the singular values. Work happens on the transpose so each
//! column is a contiguous row.

use serde::{Deserialize, Serialize};

use super::matrix::{dot, DenseMatrix};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 80;
const ORTHO_TOL: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvdResult {
    /// `rows x k` with orthonormal columns, `k = min(rows, cols)`.
    pub u: DenseMatrix,
    /// Nonincreasing, nonnegative.
    pub singular_values: Vec<f64>,
    /// `k x cols` with orthonormal rows.
    pub vt: DenseMatrix,
}

impl SvdResult {
    /// Number of singular values above `rel_tol * sigma_max`.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let top = self.singular_values.first().copied().unwrap_or(0.0);
        if top == 0.0 {
            return 0;
        }
        self.singular_values
            .iter()
            .take_while(|&&s| s > rel_tol * top)
            .count()
    }

    /// `U diag(s) Vᵀ` for an arbitrary replacement spectrum `s`.
    pub fn reassemble(&self, s: &[f64]) -> DenseMatrix {
        let (n, k) = self.u.shape();
        let d = self.vt.cols();
        let mut out = vec![0.0; n * d];
        for i in 0..n {
            let ui = self.u.row(i);
            let row = &mut out[i * d..(i + 1) * d];
            for j in 0..k {
                let w = ui[j] * s[j];
                if w != 0.0 {
                    super::axpy(w, self.vt.row(j), row);
                }
            }
        }
        DenseMatrix::from_raw(n, d, out)
    }
}

pub fn thin_svd(a: &DenseMatrix) -> Result<SvdResult> {
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return Err(Error::Empty);
    }
    if rows < cols {
        let t = thin_svd_tall(&a.transpose())?;
        return Ok(SvdResult {
            u: t.vt.transpose(),
            singular_values: t.singular_values,
            vt: t.u.transpose(),
        });
    }
    thin_svd_tall(a)
}

fn thin_svd_tall(a: &DenseMatrix) -> Result<SvdResult> {
    let (n, d) = a.shape();
    // w: row j holds column j of the rotated A; v: row j holds column j of V.
    let mut w = a.transpose();
    let mut v = DenseMatrix::identity(d);

    // Columns annihilated by cancellation keep rounding-level residue forever;
    // they are treated as exactly zero.
    let fro2 = dot(a.data(), a.data());
    let negligible = 16.0 * f64::EPSILON * f64::EPSILON * fro2;
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut rotated = false;
        for p in 0..d {
            for q in (p + 1)..d {
                let (wp, wq) = two_rows(w.data_mut(), n, p, q);
                let alpha = dot(wp, wp);
                let beta = dot(wq, wq);
                let gamma = dot(wp, wq);
                if gamma == 0.0
                    || alpha.min(beta) <= negligible
                    || gamma.abs() <= ORTHO_TOL * (alpha * beta).sqrt()
                {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(wp, wq, c, s);
                let (vp, vq) = two_rows(v.data_mut(), d, p, q);
                rotate(vp, vq, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::SvdNoConvergence { iterations: sweeps });
    }

    let norms: Vec<f64> = (0..d).map(|j| dot(w.row(j), w.row(j)).sqrt()).collect();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));

    // Columns of U stored as rows of `ut` while assembling.
    let mut ut: Vec<Vec<f64>> = Vec::with_capacity(d);
    let mut sv = Vec::with_capacity(d);
    let mut vt = Vec::with_capacity(d * d);
    for &j in &order {
        let s = norms[j];
        sv.push(s);
        vt.extend_from_slice(v.row(j));
        if s > f64::MIN_POSITIVE {
            ut.push(w.row(j).iter().map(|x| x / s).collect());
        } else {
            ut.push(Vec::new());
        }
    }
    complete_basis(&mut ut, n);

    let mut u = vec![0.0; n * d];
    for (j, col) in ut.iter().enumerate() {
        for i in 0..n {
            u[i * d + j] = col[i];
        }
    }
    Ok(SvdResult {
        u: DenseMatrix::from_raw(n, d, u),
        singular_values: sv,
        vt: DenseMatrix::from_raw(d, d, vt),
    })
}

fn two_rows(data: &mut [f64], width: usize, p: usize, q: usize) -> (&mut [f64], &mut [f64]) {
    debug_assert!(p < q);
    let (head, tail) = data.split_at_mut(q * width);
    (&mut head[p * width..(p + 1) * width], &mut tail[..width])
}

fn rotate(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (a, b) in x.iter_mut().zip(y.iter_mut()) {
        let (xa, yb) = (*a, *b);
        *a = c * xa - s * yb;
        *b = s * xa + c * yb;
    }
}

/// Fills empty slots with unit vectors orthogonal to the rest (modified
/// Gram–Schmidt against canonical directions).
fn complete_basis(cols: &mut [Vec<f64>], n: usize) {
    let mut next_canonical = 0;
    for j in 0..cols.len() {
        if !cols[j].is_empty() {
            continue;
        }
        loop {
            assert!(next_canonical < n, "cannot complete orthonormal basis");
            let mut e = vec![0.0; n];
            e[next_canonical] = 1.0;
            next_canonical += 1;
            for other in cols.iter().filter(|c| !c.is_empty()) {
                let proj = dot(other, &e);
                super::axpy(-proj, other, &mut e);
            }
            let nrm = dot(&e, &e).sqrt();
            if nrm > 1e-8 {
                e.iter_mut().for_each(|x| *x /= nrm);
                cols[j] = e;
                break;
            }
        }
    }
}

use super::matrix::{dot, DenseMatrix};
use crate::error::{Error, Result};

/// Pivots at or below this fraction of the largest diagonal entry count as
/// zero.
const PIVOT_TOL: f64 = 1e-13;

/// Lower-triangular factor `L` with `G = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Factors the lower triangle of `g`; the upper triangle is ignored.
    pub fn factor(g: &DenseMatrix) -> Result<Self> {
        let (n, c) = g.shape();
        if n != c {
            return Err(Error::DimensionMismatch {
                context: "cholesky of non-square matrix",
                expected: n,
                got: c,
            });
        }
        let max_diag = (0..n).map(|i| g.get(i, i).abs()).fold(0.0, f64::max);
        let floor = PIVOT_TOL * max_diag.max(f64::MIN_POSITIVE);
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let s = g.get(j, j) - dot(&l[j * n..j * n + j], &l[j * n..j * n + j]);
            if !(s > floor) {
                return Err(Error::Singular { pivot: j, value: s });
            }
            let ljj = s.sqrt();
            l[j * n + j] = ljj;
            for i in (j + 1)..n {
                let s = g.get(i, j) - dot(&l[i * n..i * n + j], &l[j * n..j * n + j]);
                l[i * n + j] = s / ljj;
            }
        }
        Ok(Self { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                context: "cholesky solve",
                expected: n,
                got: b.len(),
            });
        }
        let mut y = b.to_vec();
        for i in 0..n {
            let s = y[i] - dot(&self.l[i * n..i * n + i], &y[..i]);
            y[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self.l[k * n + i] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        Ok(y)
    }

    /// Solves for every column of `b`.
    pub fn solve_matrix(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        let k = b.cols();
        let mut out = DenseMatrix::zeros(b.rows(), k);
        for j in 0..k {
            let x = self.solve(&b.column(j))?;
            for (i, v) in x.into_iter().enumerate() {
                out.set(i, j, v);
            }
        }
        Ok(out)
    }
}

/// Solves `G x = b` for symmetric positive definite `G`.
pub fn solve_psd(g: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    Cholesky::factor(g)?.solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm2;
    use crate::rng::{gaussian_matrix, stream_rng};

    #[test]
    fn trivial_systems() {
        let close = |x: Vec<f64>, y: [f64; 2]| x.iter().zip(y).all(|(a, b)| (a - b).abs() < 1e-14);
        assert!(close(solve_psd(&DenseMatrix::identity(2), &[1.0, 2.0]).unwrap(), [1.0, 2.0]));
        let g = DenseMatrix::identity(2).scaled(2.0);
        assert!(close(solve_psd(&g, &[2.0, 4.0]).unwrap(), [1.0, 2.0]));
    }

    #[test]
    fn random_well_conditioned_residual() {
        let mut rng = stream_rng(5, 0);
        let m = gaussian_matrix(&mut rng, 12, 7);
        let mut g = m.gram();
        for i in 0..7 {
            let v = g.get(i, i) + 1.0;
            g.set(i, i, v);
        }
        let b: Vec<f64> = (0..7).map(|i| (i as f64 - 3.0) * 0.7).collect();
        let x = solve_psd(&g, &b).unwrap();
        let r = crate::linalg::sub_vec(&g.matvec(&x).unwrap(), &b);
        assert!(norm2(&r) <= 1e-8 * norm2(&b));
    }

    #[test]
    fn singular_reports_pivot() {
        let g = DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        match solve_psd(&g, &[1.0, 1.0]) {
            Err(Error::Singular { pivot, .. }) => assert_eq!(pivot, 1),
            other => panic!("expected singular error, got {other:?}"),
        }
        let neg = DenseMatrix::diag(&[1.0, -1.0]).unwrap();
        assert!(matches!(
            solve_psd(&neg, &[0.0, 0.0]),
            Err(Error::Singular { pivot: 1, .. })
        ));
    }
}

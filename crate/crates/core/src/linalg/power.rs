use super::matrix::{norm2, DenseMatrix};
use crate::rng::{gaussian_vec, stream_rng};

/// Inflation applied to the power-iteration estimate so the result can serve
/// as a Lipschitz constant.
pub const OPNORM_SAFETY: f64 = 1.05;

/// Upper estimate of `λ_max(BᵀB)` by power iteration, times [`OPNORM_SAFETY`].
/// Returns 0 for a zero matrix. Deterministic in `seed`.
pub fn estimate_opnorm_sq(b: &DenseMatrix, iters: usize, seed: u64) -> f64 {
    let d = b.cols();
    if d == 0 || b.rows() == 0 {
        return 0.0;
    }
    estimate_psd_max_eig(
        d,
        iters,
        seed,
        |v| {
            let bv = b.matvec(v).expect("length matches");
            b.tr_matvec(&bv).expect("length matches")
        },
    )
}

/// Same estimate for an explicit symmetric PSD matrix `g`.
pub fn estimate_sym_opnorm(g: &DenseMatrix, iters: usize, seed: u64) -> f64 {
    if g.rows() == 0 {
        return 0.0;
    }
    estimate_psd_max_eig(g.rows(), iters, seed, |v| {
        g.matvec(v).expect("length matches")
    })
}

fn estimate_psd_max_eig(
    dim: usize,
    iters: usize,
    seed: u64,
    apply: impl Fn(&[f64]) -> Vec<f64>,
) -> f64 {
    let mut rng = stream_rng(seed, 0x9e37);
    let mut v = gaussian_vec(&mut rng, dim);
    let n0 = norm2(&v);
    v.iter_mut().for_each(|x| *x /= n0);
    let mut lambda = 0.0;
    for _ in 0..iters.max(1) {
        let w = apply(&v);
        let nw = norm2(&w);
        if nw == 0.0 {
            return 0.0;
        }
        // ‖Gv‖ for unit v is bracketed by the Rayleigh quotient and λ_max.
        lambda = nw;
        v = w.into_iter().map(|x| x / nw).collect();
    }
    lambda * OPNORM_SAFETY
}

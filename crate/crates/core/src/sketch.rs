//! Sketch ensembles: dense sub-Gaussian matrices, randomized orthonormal
//! systems (random signs, Walsh–Hadamard mixing, uniform row picking), and
//! weighted row sampling.
//!
//! Every ensemble is normalized so that `E[SᵀS / m] = I_n`.

use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{fwht_rows_in_place, thin_svd, DenseMatrix};
use crate::rng::{gaussian_matrix, rademacher_vec, stream_rng};

/// Singular values below this fraction of the largest are treated as zero
/// when pseudo-inverting `SSᵀ` or testing rank.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SketchKind {
    Gaussian,
    Rademacher,
    Ros,
    RowsampleUniform,
    RowsampleLeverage,
    /// `S = √n I_n`, so `SᵀS/m = I` exactly. `m` is forced to `n`.
    Identity,
}

impl SketchKind {
    pub const ALL: [SketchKind; 6] = [
        SketchKind::Gaussian,
        SketchKind::Rademacher,
        SketchKind::Ros,
        SketchKind::RowsampleUniform,
        SketchKind::RowsampleLeverage,
        SketchKind::Identity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SketchKind::Gaussian => "gaussian",
            SketchKind::Rademacher => "rademacher",
            SketchKind::Ros => "ros",
            SketchKind::RowsampleUniform => "rowsample_uniform",
            SketchKind::RowsampleLeverage => "rowsample_leverage",
            SketchKind::Identity => "identity",
        }
    }
}

impl fmt::Display for SketchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SketchKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "gaussian" => Ok(SketchKind::Gaussian),
            "rademacher" => Ok(SketchKind::Rademacher),
            "ros" | "srht" => Ok(SketchKind::Ros),
            "rowsample_uniform" | "uniform" => Ok(SketchKind::RowsampleUniform),
            "rowsample_leverage" | "leverage" => Ok(SketchKind::RowsampleLeverage),
            "identity" => Ok(SketchKind::Identity),
            other => Err(Error::InvalidArgument(format!(
                "unknown sketch kind '{other}' (expected one of gaussian, rademacher, ros, \
                 rowsample_uniform, rowsample_leverage, identity)"
            ))),
        }
    }
}

/// Declarative description of one sketch draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SketchSpec {
    pub kind: SketchKind,
    pub m: usize,
    pub seed: u64,
    /// Stream index; IHS round `t` draws from round `t`.
    #[serde(default)]
    pub round: u64,
}

impl SketchSpec {
    pub fn new(kind: SketchKind, m: usize, seed: u64) -> Self {
        Self {
            kind,
            m,
            seed,
            round: 0,
        }
    }

    pub fn with_round(self, round: u64) -> Self {
        Self { round, ..self }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Realized {
    Explicit(DenseMatrix),
    Ros {
        n_pad: usize,
        signs: Vec<f64>,
        rows: Vec<usize>,
    },
    RowSample {
        rows: Vec<usize>,
        probs: Vec<f64>,
    },
    ScaledIdentity,
}

/// A realized sketch `S ∈ R^{m×n}`, stored explicitly or implicitly.
#[derive(Debug, Clone, PartialEq)]
pub struct SketchOperator {
    kind: SketchKind,
    n: usize,
    m: usize,
    realized: Realized,
    warning: Option<String>,
}

impl SketchOperator {
    /// Wraps an arbitrary explicit matrix (tagged as Gaussian for reporting).
    pub fn from_matrix(s: DenseMatrix) -> Self {
        let (m, n) = s.shape();
        Self {
            kind: SketchKind::Gaussian,
            n,
            m,
            realized: Realized::Explicit(s),
            warning: None,
        }
    }

    /// `S = √n I_n`, the sketch with `SᵀS/m = I`.
    pub fn scaled_identity(n: usize) -> Self {
        Self {
            kind: SketchKind::Identity,
            n,
            m: n,
            realized: Realized::ScaledIdentity,
            warning: None,
        }
    }

    pub fn kind(&self) -> SketchKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Set when the requested projection dimension exceeds `n`.
    pub fn warning(&self) -> Option<&str> {
        self.warning.as_deref()
    }

    /// ROS padded dimension (smallest power of two ≥ n).
    pub fn padded_dim(&self) -> Option<usize> {
        match &self.realized {
            Realized::Ros { n_pad, .. } => Some(*n_pad),
            _ => None,
        }
    }

    /// Sampled row indices for ROS and row-sampling operators.
    pub fn sampled_rows(&self) -> Option<&[usize]> {
        match &self.realized {
            Realized::Ros { rows, .. } | Realized::RowSample { rows, .. } => Some(rows),
            _ => None,
        }
    }

    /// Explicit `m x n` matrix.
    pub fn materialize(&self) -> DenseMatrix {
        match &self.realized {
            Realized::Explicit(s) => s.clone(),
            Realized::Ros { .. } => self
                .apply(&DenseMatrix::identity(self.n))
                .expect("identity has n rows"),
            Realized::RowSample { rows, probs } => {
                let mut s = DenseMatrix::zeros(self.m, self.n);
                for (i, &j) in rows.iter().enumerate() {
                    s.set(i, j, 1.0 / probs[j].sqrt());
                }
                s
            }
            Realized::ScaledIdentity => DenseMatrix::identity(self.n).scaled((self.n as f64).sqrt()),
        }
    }

    /// `S A`.
    pub fn apply(&self, a: &DenseMatrix) -> Result<DenseMatrix> {
        if a.rows() != self.n {
            return Err(Error::DimensionMismatch {
                context: "sketch application (rows of A vs n)",
                expected: self.n,
                got: a.rows(),
            });
        }
        let d = a.cols();
        match &self.realized {
            Realized::Explicit(s) => s.matmul(a),
            Realized::Ros { n_pad, signs, rows } => {
                // S = √n_pad P H D with orthonormal H, i.e. P H_raw D.
                let mut buf = vec![0.0; n_pad * d];
                for i in 0..self.n {
                    let sgn = signs[i];
                    for (dst, src) in buf[i * d..(i + 1) * d].iter_mut().zip(a.row(i)) {
                        *dst = sgn * src;
                    }
                }
                fwht_rows_in_place(&mut buf, d)?;
                let mut out = Vec::with_capacity(self.m * d);
                for &r in rows {
                    out.extend_from_slice(&buf[r * d..(r + 1) * d]);
                }
                Ok(DenseMatrix::from_raw(self.m, d, out))
            }
            Realized::RowSample { rows, probs } => {
                let mut out = Vec::with_capacity(self.m * d);
                for &j in rows {
                    let w = 1.0 / probs[j].sqrt();
                    out.extend(a.row(j).iter().map(|v| v * w));
                }
                Ok(DenseMatrix::from_raw(self.m, d, out))
            }
            Realized::ScaledIdentity => Ok(a.scaled((self.n as f64).sqrt())),
        }
    }

    /// `S v` for a single vector.
    pub fn apply_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        Ok(self.apply(&DenseMatrix::column_vector(v)?)?.into_data())
    }
}

/// Draws a sketch operator. Deterministic in `(spec, n)`.
pub fn build_sketch(
    spec: &SketchSpec,
    n: usize,
    leverage_p: Option<&[f64]>,
) -> Result<SketchOperator> {
    if n == 0 {
        return Err(Error::InvalidArgument("sketch source dimension n must be ≥ 1".into()));
    }
    if spec.m == 0 {
        return Err(Error::InvalidArgument("sketch dimension m must be ≥ 1".into()));
    }
    if spec.kind == SketchKind::Identity {
        return Ok(SketchOperator::scaled_identity(n));
    }
    let m = spec.m;
    let warning = (m > n).then(|| format!("sketch dimension m = {m} exceeds n = {n}"));
    let mut rng = stream_rng(spec.seed, spec.round);
    let realized = match spec.kind {
        SketchKind::Gaussian => Realized::Explicit(gaussian_matrix(&mut rng, m, n)),
        SketchKind::Rademacher => {
            Realized::Explicit(DenseMatrix::from_raw(m, n, rademacher_vec(&mut rng, m * n)))
        }
        SketchKind::Ros => {
            let n_pad = n.next_power_of_two();
            let signs = rademacher_vec(&mut rng, n_pad);
            let rows = (0..m).map(|_| rng.random_range(0..n_pad)).collect();
            Realized::Ros { n_pad, signs, rows }
        }
        SketchKind::RowsampleUniform => {
            let rows = (0..m).map(|_| rng.random_range(0..n)).collect();
            Realized::RowSample {
                rows,
                probs: vec![1.0 / n as f64; n],
            }
        }
        SketchKind::RowsampleLeverage => {
            let p = leverage_p.ok_or(Error::MissingLeverage)?;
            validate_probabilities(p, n)?;
            let dist = WeightedIndex::new(p)
                .map_err(|e| Error::InvalidProbabilities(e.to_string()))?;
            let rows = (0..m).map(|_| dist.sample(&mut rng)).collect();
            Realized::RowSample {
                rows,
                probs: p.to_vec(),
            }
        }
        SketchKind::Identity => unreachable!(),
    };
    Ok(SketchOperator {
        kind: spec.kind,
        n,
        m,
        realized,
        warning,
    })
}

/// Shorthand for `op.apply(a)`.
pub fn apply_sketch(op: &SketchOperator, a: &DenseMatrix) -> Result<DenseMatrix> {
    op.apply(a)
}

fn validate_probabilities(p: &[f64], n: usize) -> Result<()> {
    if p.len() != n {
        return Err(Error::DimensionMismatch {
            context: "leverage probability vector",
            expected: n,
            got: p.len(),
        });
    }
    if let Some(j) = p.iter().position(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidProbabilities(format!(
            "entry {j} is {} (must be finite and nonnegative)",
            p[j]
        )));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidProbabilities(format!(
            "entries sum to {total}, not 1"
        )));
    }
    Ok(())
}

/// Statistical leverage: `p_j = ‖u_j‖² / d` for the rows `u_j` of the left
/// singular factor of a full-column-rank `A`.
pub fn leverage_scores(a: &DenseMatrix) -> Result<Vec<f64>> {
    let d = a.cols();
    let svd = thin_svd(a)?;
    let rank = svd.rank(RANK_TOL);
    if rank < d {
        return Err(Error::RankDeficient { rank, cols: d });
    }
    Ok((0..a.rows())
        .map(|j| svd.u.row(j).iter().map(|x| x * x).sum::<f64>() / d as f64)
        .collect())
}

/// `α = n · max_j p_j`; the weights are α-balanced for this α.
pub fn alpha_balance(p: &[f64]) -> f64 {
    p.len() as f64 * p.iter().copied().fold(0.0, f64::max)
}

/// Outcome of the Monte Carlo check of `‖E[Sᵀ(SSᵀ)⁻¹S]‖ ≤ η m/n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionEstimate {
    pub eta: f64,
    pub trials: usize,
    /// Draws whose `SSᵀ` was singular and had to be pseudo-inverted.
    pub singular_draws: usize,
}

/// Estimates `η̂ = (n/m) ‖mean_t Sₜᵀ(SₜSₜᵀ)⁺Sₜ‖_op` over `trials` independent
/// draws (rounds `0..trials` of `spec.seed`).
pub fn verify_projection_condition(
    spec: &SketchSpec,
    n: usize,
    trials: usize,
) -> Result<ConditionEstimate> {
    verify_projection_condition_with(spec, n, trials, None)
}

pub fn verify_projection_condition_with(
    spec: &SketchSpec,
    n: usize,
    trials: usize,
    leverage_p: Option<&[f64]>,
) -> Result<ConditionEstimate> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be ≥ 1".into()));
    }
    let m = if spec.kind == SketchKind::Identity { n } else { spec.m };
    if m > n {
        return Err(Error::InvalidArgument(format!(
            "projection condition needs m ≤ n (m = {m}, n = {n})"
        )));
    }
    const CHUNK: usize = 64;
    let mut acc = CompensatedMatrix::new(n * n);
    let mut singular_draws = 0;
    let mut start = 0;
    while start < trials {
        let end = (start + CHUNK).min(trials);
        let chunk: Vec<(Vec<f64>, bool)> = (start..end)
            .into_par_iter()
            .map(|t| row_space_projector(spec, n, t as u64, leverage_p))
            .collect::<Result<_>>()?;
        // Summed in trial order so the total does not depend on scheduling.
        for (proj, singular) in chunk {
            acc.add(&proj);
            singular_draws += usize::from(singular);
        }
        start = end;
    }
    let mean = DenseMatrix::from_raw(
        n,
        n,
        acc.finish().into_iter().map(|v| v / trials as f64).collect(),
    );
    let top = thin_svd(&mean)?.singular_values[0];
    Ok(ConditionEstimate {
        eta: n as f64 / m as f64 * top,
        trials,
        singular_draws,
    })
}

fn row_space_projector(
    spec: &SketchSpec,
    n: usize,
    round: u64,
    leverage_p: Option<&[f64]>,
) -> Result<(Vec<f64>, bool)> {
    let op = build_sketch(&spec.with_round(round), n, leverage_p)?;
    let s = op.materialize();
    let svd = thin_svd(&s)?;
    let rank = svd.rank(RANK_TOL);
    let mut proj = vec![0.0; n * n];
    for k in 0..rank {
        let v = svd.vt.row(k);
        for i in 0..n {
            if v[i] == 0.0 {
                continue;
            }
            let row = &mut proj[i * n..(i + 1) * n];
            crate::linalg::axpy(v[i], v, row);
        }
    }
    Ok((proj, rank < op.m()))
}

/// Neumaier-compensated elementwise accumulator.
struct CompensatedMatrix {
    sum: Vec<f64>,
    comp: Vec<f64>,
}

impl CompensatedMatrix {
    fn new(len: usize) -> Self {
        Self {
            sum: vec![0.0; len],
            comp: vec![0.0; len],
        }
    }

    fn add(&mut self, x: &[f64]) {
        for ((s, c), &v) in self.sum.iter_mut().zip(self.comp.iter_mut()).zip(x) {
            let t = *s + v;
            if s.abs() >= v.abs() {
                *c += (*s - t) + v;
            } else {
                *c += (v - t) + *s;
            }
            *s = t;
        }
    }

    fn finish(self) -> Vec<f64> {
        self.sum.iter().zip(&self.comp).map(|(s, c)| s + c).collect()
    }
}

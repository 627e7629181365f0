//! Personalized-PageRank attention diffusion.
//!
//! Given a row-stochastic attention `A` over the edges of a pattern and
//! values `V`, the diffusion operator is
//!
//! ```text
//! 𝒜 = Σ_k α(1-α)^k A^k = α (I - (1-α) A)^-1
//! ```
//!
//! and [`diffuse`] approximates `𝒜V` with `K` steps of
//!
//! ```text
//! Z_0 = V,   Z_{k+1} = (1-α) A Z_k + α V.
//! ```
//!
//! After `K` steps `Z_K = ((1-α)^K A^K + Σ_{k<K} α(1-α)^k A^k) V`, so the
//! gap to `𝒜V` is bounded by `2 (1-α)^K ‖V‖_∞` ([`truncation_error_bound`]).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::graph::AttentionGraph;
use crate::numeric::all_finite;
use crate::Matrix;

/// Row-sum deviation accepted by [`diffuse`] and the dense oracles.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// Largest `n` for which dense `n × n` oracles are built.
pub const DENSE_ORACLE_LIMIT: usize = 1024;

/// Attention weights aligned with the edges of a graph.
#[derive(Clone, Debug)]
pub struct EdgeAttention<'g> {
    graph: &'g AttentionGraph,
    weights: Vec<f64>,
}

impl<'g> EdgeAttention<'g> {
    /// Wrap per-edge weights. Weights must be finite and non-negative; row
    /// sums are checked where they matter ([`diffuse`]).
    pub fn new(graph: &'g AttentionGraph, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != graph.nnz() {
            return Err(Error::ShapeMismatch(format!(
                "{} weights for {} edges",
                weights.len(),
                graph.nnz()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(invalid(format!("attention weight {w} is not a finite non-negative value")));
        }
        Ok(EdgeAttention { graph, weights })
    }

    /// Uniform attention `1 / deg(i)` over each row.
    pub fn uniform(graph: &'g AttentionGraph) -> Result<Self> {
        let mut weights = Vec::with_capacity(graph.nnz());
        for i in 0..graph.n() {
            let deg = graph.degree(i);
            if deg == 0 {
                return Err(Error::EmptyRow(i));
            }
            weights.extend(std::iter::repeat(1.0 / deg as f64).take(deg));
        }
        Ok(EdgeAttention { graph, weights })
    }

    pub fn graph(&self) -> &'g AttentionGraph {
        self.graph
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn row_weights(&self, i: usize) -> &[f64] {
        &self.weights[self.graph.row_range(i)]
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.graph.n(), self.graph.n());
        for (e, (i, j, _)) in self.graph.edges().enumerate() {
            m[(i, j)] = self.weights[e];
        }
        m
    }

    /// Fail on the first row whose sum is off by more than `tolerance`.
    pub fn check_row_stochastic(&self, tolerance: f64) -> Result<()> {
        for i in 0..self.graph.n() {
            let sum: f64 = self.row_weights(i).iter().sum();
            if (sum - 1.0).abs() > tolerance {
                return Err(Error::NotRowStochastic {
                    row: i,
                    sum,
                    tolerance,
                });
            }
        }
        Ok(())
    }
}

/// Teleport probability and number of propagation steps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffusionConfig {
    alpha: f64,
    steps: usize,
}

impl Default for DiffusionConfig {
    /// `α = 0.1`, `K = 5`.
    fn default() -> Self {
        DiffusionConfig {
            alpha: 0.1,
            steps: 5,
        }
    }
}

impl DiffusionConfig {
    /// Requires `0 < α ≤ 1`.
    pub fn new(alpha: f64, steps: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(invalid(format!("teleport probability must lie in (0, 1], got {alpha}")));
        }
        Ok(DiffusionConfig { alpha, steps })
    }

    /// A single plain propagation `Z_1 = A V` (`α = 0`, `K = 1`): ordinary
    /// sparse attention without diffusion.
    pub fn one_hop() -> Self {
        DiffusionConfig {
            alpha: 0.0,
            steps: 1,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Check a deserialized config. `α = 0` is accepted here since the
    /// truncated recursion is well defined for it.
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(invalid(format!(
                "teleport probability must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// `out[i] = Σ_{j ∈ Ne(i)} A(i, j) Z[j]`, each row summed in ascending
/// column order.
pub fn sparse_row_matvec(a: &EdgeAttention<'_>, z: &Matrix) -> Result<Matrix> {
    let g = a.graph;
    if z.nrows() != g.n() {
        return Err(Error::ShapeMismatch(format!(
            "attention over {} tokens applied to {} rows",
            g.n(),
            z.nrows()
        )));
    }
    let dv = z.ncols();
    // Columns of the transpose are the rows of z, contiguous in memory.
    let zt = z.transpose();
    let rows: Vec<Vec<f64>> = (0..g.n())
        .into_par_iter()
        .map(|i| {
            let mut acc = vec![0.0; dv];
            for e in g.row_range(i) {
                let w = a.weights[e];
                let src = zt.column(g.col_indices()[e]);
                for (slot, x) in acc.iter_mut().zip(src.iter()) {
                    *slot += w * x;
                }
            }
            acc
        })
        .collect();
    Ok(Matrix::from_fn(g.n(), dv, |i, c| rows[i][c]))
}

fn check_values(n: usize, v: &Matrix) -> Result<()> {
    if v.nrows() != n {
        return Err(Error::ShapeMismatch(format!(
            "values have {} rows, graph has {n} tokens",
            v.nrows()
        )));
    }
    if !all_finite(v) {
        return Err(invalid("values contain non-finite entries"));
    }
    Ok(())
}

/// `Z_0 .. Z_K` of the propagation recursion.
pub fn diffuse_trajectory(
    a: &EdgeAttention<'_>,
    v: &Matrix,
    cfg: &DiffusionConfig,
) -> Result<Vec<Matrix>> {
    cfg.validate()?;
    check_values(a.graph.n(), v)?;
    a.check_row_stochastic(ROW_SUM_TOLERANCE)?;
    let keep = 1.0 - cfg.alpha;
    let mut traj = Vec::with_capacity(cfg.steps + 1);
    traj.push(v.clone());
    for _ in 0..cfg.steps {
        let mut next = sparse_row_matvec(a, traj.last().unwrap())?;
        next.zip_apply(v, |z, x| *z = keep * *z + cfg.alpha * x);
        traj.push(next);
    }
    Ok(traj)
}

/// `Z_K`, the `K`-step approximation of `𝒜V`. `K = 0` returns `V`.
pub fn diffuse(a: &EdgeAttention<'_>, v: &Matrix, cfg: &DiffusionConfig) -> Result<Matrix> {
    Ok(diffuse_trajectory(a, v, cfg)?.pop().unwrap())
}

fn check_dense_row_stochastic(a: &Matrix) -> Result<()> {
    if !a.is_square() {
        return Err(Error::ShapeMismatch(format!("attention is {}×{}", a.nrows(), a.ncols())));
    }
    for (i, row) in a.row_iter().enumerate() {
        if row.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(invalid(format!("row {i} has a negative or non-finite entry")));
        }
        let sum = row.sum();
        if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
            return Err(Error::NotRowStochastic {
                row: i,
                sum,
                tolerance: ROW_SUM_TOLERANCE,
            });
        }
    }
    Ok(())
}

/// The same recursion as [`diffuse`] on a dense attention matrix.
pub fn diffuse_dense(a: &Matrix, v: &Matrix, cfg: &DiffusionConfig) -> Result<Matrix> {
    cfg.validate()?;
    check_dense_row_stochastic(a)?;
    check_values(a.nrows(), v)?;
    let keep = 1.0 - cfg.alpha;
    let mut z = v.clone();
    for _ in 0..cfg.steps {
        z = keep * (a * &z) + cfg.alpha * v;
    }
    Ok(z)
}

fn resolvent_lu(
    a: &Matrix,
    alpha: f64,
) -> Result<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(invalid(format!("teleport probability must lie in (0, 1], got {alpha}")));
    }
    check_dense_row_stochastic(a)?;
    if a.nrows() > DENSE_ORACLE_LIMIT {
        return Err(invalid(format!(
            "dense oracle limited to n ≤ {DENSE_ORACLE_LIMIT}, got {}",
            a.nrows()
        )));
    }
    let n = a.nrows();
    Ok((Matrix::identity(n, n) - (1.0 - alpha) * a).lu())
}

/// Exact diffusion operator `𝒜 = α (I - (1-α) A)^-1` of a dense
/// row-stochastic matrix.
pub fn exact_diffusion_operator(a: &Matrix, alpha: f64) -> Result<Matrix> {
    let lu = resolvent_lu(a, alpha)?;
    let inv = lu
        .try_inverse()
        .ok_or_else(|| Error::Numerical("diffusion resolvent is singular".into()))?;
    Ok(alpha * inv)
}

/// `𝒜V` by a direct solve, without forming `𝒜`.
pub fn exact_diffusion(a: &Matrix, v: &Matrix, alpha: f64) -> Result<Matrix> {
    check_values(a.nrows(), v)?;
    let lu = resolvent_lu(a, alpha)?;
    let x = lu
        .solve(v)
        .ok_or_else(|| Error::Numerical("diffusion resolvent is singular".into()))?;
    Ok(alpha * x)
}

/// Weights `θ_k = α(1-α)^k` for `k ≤ K` and the mass `(1-α)^{K+1}` left
/// out by truncating there.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiffusionCoefficients {
    pub theta: Vec<f64>,
    pub residual: f64,
}

pub fn diffusion_coefficients(cfg: &DiffusionConfig) -> DiffusionCoefficients {
    let keep = 1.0 - cfg.alpha;
    let theta = (0..=cfg.steps)
        .map(|k| cfg.alpha * keep.powi(k as i32))
        .collect();
    DiffusionCoefficients {
        theta,
        residual: keep.powi(cfg.steps as i32 + 1),
    }
}

/// Bound on `‖Z_K - 𝒜V‖_∞` given `‖V‖_∞ = vmax`: `2 (1-α)^K vmax`.
pub fn truncation_error_bound(cfg: &DiffusionConfig, vmax: f64) -> f64 {
    2.0 * (1.0 - cfg.alpha).powi(cfg.steps as i32) * vmax
}

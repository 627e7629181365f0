use serde::Serialize;

use super::{adjacency_spectrum, UndirectedGraph};
use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MixingPoint {
    pub t: usize,
    /// `‖Âᵗv₀ - u‖₁`
    pub distance: f64,
    /// `√n βᵗ`
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MixingCurve {
    pub n: usize,
    pub d: usize,
    pub beta: f64,
    pub points: Vec<MixingPoint>,
}

/// Relative slack on the bound; `β` itself comes from an eigensolver.
const BOUND_SLACK: f64 = 1e-9;

/// L1 distance to the uniform distribution of the walk `Â = A/d` started
/// at `v0`, for `t = 0..=t_max`, next to the bound `√n βᵗ`. Fails with a
/// tolerance breach if any point exceeds its bound.
///
/// The walk propagates the deviation `v₀ - u` and re-centres it every step;
/// `Â` preserves zero-sum vectors, so this is exact arithmetic's `Âᵗv₀ - u`
/// without the `1e-16` floor left by subtracting two nearly equal vectors.
pub fn mixing_tv_curve(g: &UndirectedGraph, v0: &[f64], t_max: usize) -> Result<MixingCurve> {
    let n = g.n();
    let d = g
        .regular_degree()
        .filter(|&d| d > 0)
        .ok_or_else(|| invalid("mixing bound needs a d-regular graph"))?;
    if v0.len() != n {
        return Err(Error::ShapeMismatch(format!("start vector of length {} for n = {n}", v0.len())));
    }
    let total: f64 = v0.iter().sum();
    if v0.iter().any(|p| !p.is_finite() || *p < 0.0) || (total - 1.0).abs() > 1e-9 {
        return Err(invalid("start vector must be a probability distribution"));
    }

    let adj = adjacency_spectrum(g)?;
    let df = d as f64;
    let beta = adj.eigenvalues[n - 2].abs().max(adj.eigenvalues[0].abs()) / df;
    let root_n = (n as f64).sqrt();

    let u = 1.0 / n as f64;
    let mut x: Vec<f64> = v0.iter().map(|p| p - u).collect();
    let mut next = vec![0.0; n];
    let mut points = Vec::with_capacity(t_max + 1);
    for t in 0..=t_max {
        if t > 0 {
            for (i, slot) in next.iter_mut().enumerate() {
                *slot = g.neighbors(i).iter().map(|&j| x[j]).sum::<f64>() / df;
            }
            let mean = next.iter().sum::<f64>() / n as f64;
            for (xi, ni) in x.iter_mut().zip(&next) {
                *xi = ni - mean;
            }
        }
        let distance: f64 = x.iter().map(|v| v.abs()).sum();
        let bound = root_n * beta.powi(t as i32);
        if distance > bound * (1.0 + BOUND_SLACK) {
            return Err(Error::ToleranceBreach {
                what: format!("mixing distance at t = {t} against √n βᵗ = {bound:e}"),
                value: distance,
                tolerance: bound,
            });
        }
        points.push(MixingPoint { t, distance, bound });
    }
    Ok(MixingCurve { n, d, beta, points })
}

use serde::Serialize;

use super::{adjacency_spectrum, laplacian_spectrum, normalized_laplacian_spectrum, UndirectedGraph};
use crate::error::{invalid, Result};

/// Largest graph [`cheeger_bruteforce`] enumerates (`2^n` subsets).
pub const CHEEGER_LIMIT: usize = 14;

/// Expansion summary of an undirected graph.
///
/// `epsilon` is `max_{i≥2} |μ_i| / d` over the adjacency eigenvalues
/// `μ_1 ≥ μ_2 ≥ … ≥ μ_n`, and `beta` the walk's gap ratio
/// `max(|μ_2|, |μ_n|) / d`. On irregular graphs `d` is the mean degree and
/// `approximate` is set. The Cheeger bounds use the combinatorial
/// Laplacian's `λ₂` and, when irregular, the maximum degree.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExpanderReport {
    pub n: usize,
    pub regular: bool,
    pub d_min: usize,
    pub d_max: usize,
    pub d_mean: f64,
    pub approximate: bool,
    pub mu2: f64,
    pub mu_n: f64,
    pub epsilon: f64,
    pub beta: f64,
    /// Second-smallest normalized-Laplacian eigenvalue.
    pub lambda2: f64,
    /// Second-smallest eigenvalue of `D - A`.
    pub laplacian_lambda2: f64,
    pub cheeger_lower: f64,
    pub cheeger_upper: f64,
}

pub fn expander_report(g: &UndirectedGraph) -> Result<ExpanderReport> {
    let n = g.n();
    if n < 2 {
        return Err(invalid(format!("expansion needs n ≥ 2, got {n}")));
    }
    let degrees: Vec<usize> = (0..n).map(|i| g.degree(i)).collect();
    let d_min = *degrees.iter().min().expect("n ≥ 2");
    let d_max = *degrees.iter().max().expect("n ≥ 2");
    let d_mean = degrees.iter().sum::<usize>() as f64 / n as f64;
    let regular = d_min == d_max;

    let adj = adjacency_spectrum(g)?;
    let mu2 = adj.eigenvalues[n - 2];
    let mu_n = adj.eigenvalues[0];
    let sigma = mu2.abs().max(mu_n.abs());
    let epsilon = adj.eigenvalues[..n - 1]
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        / d_mean;

    let lambda2 = normalized_laplacian_spectrum(g)?.lambda(2);
    let laplacian_lambda2 = laplacian_spectrum(g)?.lambda(2);
    let (cheeger_lower, cheeger_upper) = cheeger_bounds(laplacian_lambda2, d_max);
    Ok(ExpanderReport {
        n,
        regular,
        d_min,
        d_max,
        d_mean,
        approximate: !regular,
        mu2,
        mu_n,
        epsilon,
        beta: sigma / d_mean,
        lambda2,
        laplacian_lambda2,
        cheeger_lower,
        cheeger_upper,
    })
}

fn cheeger_bounds(lambda2: f64, d: usize) -> (f64, f64) {
    let lambda2 = lambda2.max(0.0);
    (lambda2 / 2.0, (2.0 * d as f64 * lambda2).sqrt())
}

/// Edge expansion `h(G) = min_{0 < |S| ≤ n/2} |E(S, S̄)| / |S|` by
/// enumerating every subset. Self loops never cross a cut.
pub fn cheeger_bruteforce(g: &UndirectedGraph) -> Result<f64> {
    let n = g.n();
    if !(2..=CHEEGER_LIMIT).contains(&n) {
        return Err(invalid(format!(
            "brute-force edge expansion needs 2 ≤ n ≤ {CHEEGER_LIMIT}, got {n}"
        )));
    }
    let masks: Vec<u32> = (0..n)
        .map(|i| g.neighbors(i).iter().fold(0u32, |m, &j| m | 1 << j))
        .collect();
    // Best ratio kept as (cut, size) and compared by cross-multiplication.
    let mut best = (u32::MAX, 1u32);
    for s in 1u32..(1 << n) {
        let size = s.count_ones();
        if size as usize > n / 2 {
            continue;
        }
        let cut: u32 = (0..n)
            .filter(|&i| s >> i & 1 == 1)
            .map(|i| (masks[i] & !s).count_ones())
            .sum();
        if u64::from(cut) * u64::from(best.1) < u64::from(best.0) * u64::from(size) {
            best = (cut, size);
        }
    }
    Ok(f64::from(best.0) / f64::from(best.1))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheegerReport {
    pub h: f64,
    pub d: usize,
    pub laplacian_lambda2: f64,
    pub lower: f64,
    pub upper: f64,
    pub holds: bool,
}

/// `λ₂/2 ≤ h(G) ≤ √(2dλ₂)` with `λ₂` of `D - A` and `d` the maximum degree.
pub fn cheeger_report(g: &UndirectedGraph) -> Result<CheegerReport> {
    let h = cheeger_bruteforce(g)?;
    let d = (0..g.n()).map(|i| g.degree(i)).max().unwrap_or(0);
    let laplacian_lambda2 = laplacian_spectrum(g)?.lambda(2);
    let (lower, upper) = cheeger_bounds(laplacian_lambda2, d);
    // Eigenvalues carry rounding; h is exact.
    let slack = 1e-9;
    Ok(CheegerReport {
        h,
        d,
        laplacian_lambda2,
        lower,
        upper,
        holds: lower <= h + slack && h <= upper + slack,
    })
}

/// Smallest `ε` with `(1-ε) xᵀL_H x ≤ xᵀL_G x ≤ (1+ε) xᵀL_H x` for
/// `H = (d/n) K_n`: `max_{i≥2} |d - λ_i(D - A)| / d`.
pub fn complete_graph_approx_epsilon(g: &UndirectedGraph) -> Result<f64> {
    let d = g
        .regular_degree()
        .filter(|&d| d > 0)
        .ok_or_else(|| invalid("complete-graph approximation needs a d-regular graph"))?;
    let d = d as f64;
    let l = laplacian_spectrum(g)?;
    Ok(l.eigenvalues[1..]
        .iter()
        .fold(0.0f64, |m, v| m.max((d - v).abs()))
        / d)
}

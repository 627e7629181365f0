//! Spectral analysis of attention patterns.
//!
//! Patterns are analysed as undirected graphs: an edge `{i, j}` exists when
//! either `i → j` or `j → i` does. Spectra come from a dense symmetric
//! eigensolver, so everything here is desk scale (`n ≤ 4096`).

mod expander;
mod mixing;
mod transform;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::graph::AttentionGraph;
use crate::Matrix;

pub use expander::{
    cheeger_bruteforce, cheeger_report, complete_graph_approx_epsilon, expander_report,
    CheegerReport, ExpanderReport, CHEEGER_LIMIT,
};
pub use mixing::{mixing_tv_curve, MixingCurve, MixingPoint};
pub use transform::{
    diffusion_eigenvalue_map, truncated_diffusion_spectrum, verify_eigen_transform, Kernel,
    EIGEN_TRANSFORM_LIMIT,
};

/// Largest graph handed to the dense eigensolver.
pub const SPECTRAL_LIMIT: usize = 4096;

/// Absolute tolerance for comparing sorted spectra.
pub const EIGEN_TOLERANCE: f64 = 1e-8;

/// What happens to self loops when a pattern is symmetrized.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SelfLoops {
    Drop,
    Keep,
}

/// Simple undirected graph with sorted adjacency lists. A self loop
/// contributes one to its node's degree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UndirectedGraph {
    adj: Vec<Vec<usize>>,
}

impl UndirectedGraph {
    pub fn from_attention(g: &AttentionGraph, self_loops: SelfLoops) -> Self {
        let mut adj = vec![Vec::new(); g.n()];
        for (i, j, _) in g.edges() {
            if i == j {
                if self_loops == SelfLoops::Keep {
                    adj[i].push(i);
                }
            } else {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
        Self::from_lists(adj)
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adj = vec![Vec::new(); n];
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(invalid(format!("edge ({i}, {j}) out of range for n = {n}")));
            }
            adj[i].push(j);
            if i != j {
                adj[j].push(i);
            }
        }
        Ok(Self::from_lists(adj))
    }

    fn from_lists(mut adj: Vec<Vec<usize>>) -> Self {
        for row in &mut adj {
            row.sort_unstable();
            row.dedup();
        }
        UndirectedGraph { adj }
    }

    /// `K_n` without self loops.
    pub fn complete(n: usize) -> Self {
        let adj = (0..n).map(|i| (0..n).filter(|&j| j != i).collect()).collect();
        UndirectedGraph { adj }
    }

    /// `C_n`, `n ≥ 3`.
    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(invalid(format!("a cycle needs n ≥ 3, got {n}")));
        }
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Self::from_edges(n, &edges)
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].len()
    }

    /// Undirected edges, self loops included once.
    pub fn edge_count(&self) -> usize {
        let loops = (0..self.n()).filter(|&i| self.adj[i].binary_search(&i).is_ok()).count();
        (self.adj.iter().map(Vec::len).sum::<usize>() + loops) / 2
    }

    /// `Some(d)` when every node has degree `d`.
    pub fn regular_degree(&self) -> Option<usize> {
        let d = self.adj.first().map_or(0, Vec::len);
        self.adj.iter().all(|row| row.len() == d).then_some(d)
    }

    pub fn component_count(&self) -> usize {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut stack = Vec::new();
        let mut components = 0;
        for start in 0..n {
            if seen[start] {
                continue;
            }
            components += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(u) = stack.pop() {
                for &v in &self.adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
        }
        components
    }

    pub fn adjacency(&self) -> Matrix {
        let n = self.n();
        let mut a = Matrix::zeros(n, n);
        for (i, row) in self.adj.iter().enumerate() {
            for &j in row {
                a[(i, j)] = 1.0;
            }
        }
        a
    }

    /// `D^{-1/2} A D^{-1/2}`, the symmetric form of the uniform walk.
    pub fn normalized_adjacency(&self) -> Result<Matrix> {
        let inv_sqrt: Vec<f64> = (0..self.n())
            .map(|i| match self.degree(i) {
                0 => Err(invalid(format!("node {i} is isolated"))),
                d => Ok(1.0 / (d as f64).sqrt()),
            })
            .collect::<Result<_>>()?;
        let n = self.n();
        let mut a = Matrix::zeros(n, n);
        for (i, row) in self.adj.iter().enumerate() {
            for &j in row {
                a[(i, j)] = inv_sqrt[i] * inv_sqrt[j];
            }
        }
        Ok(a)
    }

    /// Combinatorial Laplacian `D - A`.
    pub fn laplacian(&self) -> Matrix {
        let mut l = -self.adjacency();
        for i in 0..self.n() {
            l[(i, i)] += self.degree(i) as f64;
        }
        l
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operator {
    /// `I - D^{-1/2} A D^{-1/2}`
    NormalizedLaplacian,
    /// `A`
    Adjacency,
    /// `D^{-1} A`, similar to `D^{-1/2} A D^{-1/2}`.
    Transition,
    /// `D - A`
    Laplacian,
    /// `I - T_K` for the `K`-step truncated diffusion `T_K` of the walk.
    DiffusionLaplacian,
}

impl std::str::FromStr for Operator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "lap" | "normalized_laplacian" => Operator::NormalizedLaplacian,
            "adj" | "adjacency" => Operator::Adjacency,
            "trans" | "transition" => Operator::Transition,
            "comb" | "laplacian" => Operator::Laplacian,
            _ => return Err(invalid(format!("unknown operator {s:?}"))),
        })
    }
}

/// Eigenvalues sorted ascending.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub operator: Operator,
    pub eigenvalues: Vec<f64>,
}

impl Spectrum {
    pub(crate) fn from_symmetric(operator: Operator, m: Matrix) -> Self {
        let mut eigenvalues: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        eigenvalues.sort_by(f64::total_cmp);
        Spectrum {
            operator,
            eigenvalues,
        }
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `λ_i` with 1-based `i`, as in `λ₁ ≤ λ₂ ≤ … ≤ λ_n`.
    pub fn lambda(&self, i: usize) -> f64 {
        self.eigenvalues[i - 1]
    }

    /// Eigenvalues within `tol` of zero.
    pub fn zero_multiplicity(&self, tol: f64) -> usize {
        self.eigenvalues.iter().filter(|v| v.abs() <= tol).count()
    }

    /// `index,eigenvalue` rows with 1-based indices.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "index,eigenvalue")?;
        for (i, v) in self.eigenvalues.iter().enumerate() {
            writeln!(out, "{},{v:?}", i + 1)?;
        }
        Ok(())
    }
}

fn check_size(g: &UndirectedGraph) -> Result<()> {
    match g.n() {
        0 => Err(invalid("spectrum of an empty graph")),
        n if n > SPECTRAL_LIMIT => Err(invalid(format!(
            "dense eigensolver limited to n ≤ {SPECTRAL_LIMIT}, got {n}"
        ))),
        _ => Ok(()),
    }
}

pub fn spectrum(g: &UndirectedGraph, operator: Operator) -> Result<Spectrum> {
    check_size(g)?;
    let n = g.n();
    let m = match operator {
        Operator::NormalizedLaplacian => Matrix::identity(n, n) - g.normalized_adjacency()?,
        Operator::Adjacency => g.adjacency(),
        Operator::Transition => g.normalized_adjacency()?,
        Operator::Laplacian => g.laplacian(),
        Operator::DiffusionLaplacian => {
            return Err(invalid("use truncated_diffusion_spectrum for the diffusion operator"))
        }
    };
    Ok(Spectrum::from_symmetric(operator, m))
}

pub fn normalized_laplacian_spectrum(g: &UndirectedGraph) -> Result<Spectrum> {
    spectrum(g, Operator::NormalizedLaplacian)
}

pub fn adjacency_spectrum(g: &UndirectedGraph) -> Result<Spectrum> {
    spectrum(g, Operator::Adjacency)
}

pub fn transition_spectrum(g: &UndirectedGraph) -> Result<Spectrum> {
    spectrum(g, Operator::Transition)
}

pub fn laplacian_spectrum(g: &UndirectedGraph) -> Result<Spectrum> {
    spectrum(g, Operator::Laplacian)
}

/// Spectrum of an attention pattern, symmetrized with self loops dropped.
pub fn pattern_spectrum(g: &AttentionGraph, operator: Operator) -> Result<Spectrum> {
    spectrum(&UndirectedGraph::from_attention(g, SelfLoops::Drop), operator)
}

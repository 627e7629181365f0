use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{AttentionGraph, EdgeLabel};

/// One value per attention type.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LabelCounts<T> {
    #[serde(rename = "self")]
    pub self_loops: T,
    pub local: T,
    pub global: T,
    pub random: T,
}

impl<T: Copy> LabelCounts<T> {
    pub fn get(&self, label: EdgeLabel) -> T {
        match label {
            EdgeLabel::SelfLoop => self.self_loops,
            EdgeLabel::Local => self.local,
            EdgeLabel::Global => self.global,
            EdgeLabel::Random => self.random,
        }
    }

    fn get_mut(&mut self, label: EdgeLabel) -> &mut T {
        match label {
            EdgeLabel::SelfLoop => &mut self.self_loops,
            EdgeLabel::Local => &mut self.local,
            EdgeLabel::Global => &mut self.global,
            EdgeLabel::Random => &mut self.random,
        }
    }
}

/// Non-zero counts of a pattern, absolute and as a percentage of `n²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternStats {
    pub n: usize,
    pub nnz_total: usize,
    pub nnz_by_label: LabelCounts<usize>,
    pub pct_total: f64,
    pub pct_by_label: LabelCounts<f64>,
}

pub fn pattern_stats(g: &AttentionGraph) -> PatternStats {
    let mut counts = LabelCounts::<usize>::default();
    for &l in g.edge_labels() {
        *counts.get_mut(l) += 1;
    }
    let full = (g.n() as f64).powi(2);
    let pct = |c: usize| if full > 0.0 { 100.0 * c as f64 / full } else { 0.0 };
    PatternStats {
        n: g.n(),
        nnz_total: g.nnz(),
        nnz_by_label: counts,
        pct_total: pct(g.nnz()),
        pct_by_label: LabelCounts {
            self_loops: pct(counts.self_loops),
            local: pct(counts.local),
            global: pct(counts.global),
            random: pct(counts.random),
        },
    }
}

/// Structural preconditions a pattern needs for diffusion to reach every
/// token.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub has_all_self_loops: bool,
    /// Weak connectivity, edges taken as undirected.
    pub is_connected: bool,
    /// Every consecutive pair `(i, i+1)` is linked in at least one
    /// direction, a witness for a Hamiltonian path in token order.
    pub has_identity_chain: bool,
}

pub fn check_assumption(g: &AttentionGraph) -> AssumptionReport {
    let n = g.n();
    let has_all_self_loops = g.is_finalized();
    let has_identity_chain =
        (0..n.saturating_sub(1)).all(|i| g.has_edge(i, i + 1) || g.has_edge(i + 1, i));

    let reverse = g.transpose();
    let mut seen = vec![false; n];
    let mut queue = VecDeque::new();
    if n > 0 {
        seen[0] = true;
        queue.push_back(0);
    }
    let mut reached = usize::from(n > 0);
    while let Some(u) = queue.pop_front() {
        for &v in g.neighbors(u).iter().chain(reverse.neighbors(u)) {
            if !seen[v] {
                seen[v] = true;
                reached += 1;
                queue.push_back(v);
            }
        }
    }
    AssumptionReport {
        has_all_self_loops,
        is_connected: reached == n,
        has_identity_chain,
    }
}

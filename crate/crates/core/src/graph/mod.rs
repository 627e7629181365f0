//! Sparse attention patterns.
//!
//! An [`AttentionGraph`] is a directed graph over `n` tokens in compressed
//! row form: edge `(i, j)` means query `i` attends to key `j`. Column indices
//! are strictly increasing within every row and each edge carries the
//! [`EdgeLabel`] of the pattern that produced it.
//!
//! Builders produce one pattern each; [`union`] merges them and
//! [`AttentionGraph::finalize`] inserts the self loops every token needs.

mod builders;
mod io;
mod stats;

pub use builders::{
    build_complete, build_global, build_global_blockwise, build_local_window,
    build_random_blockwise, build_random_tokenwise, build_regular_random,
    build_regular_random_with_budget, build_ring,
    REGULAR_RETRY_BUDGET,
};
pub use io::{read_graph, read_graph_binary, read_graph_text, write_graph, write_graph_binary,
    write_graph_text};
pub use stats::{check_assumption, pattern_stats, AssumptionReport, LabelCounts, PatternStats};

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::Matrix;

/// Attention type of an edge.
///
/// The declaration order is the merge priority: when two patterns contribute
/// the same edge, the larger label wins.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeLabel {
    Random,
    Local,
    Global,
    #[serde(rename = "self")]
    SelfLoop,
}

impl EdgeLabel {
    pub const ALL: [EdgeLabel; 4] = [
        EdgeLabel::SelfLoop,
        EdgeLabel::Local,
        EdgeLabel::Global,
        EdgeLabel::Random,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EdgeLabel::SelfLoop => "self",
            EdgeLabel::Local => "local",
            EdgeLabel::Global => "global",
            EdgeLabel::Random => "random",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            EdgeLabel::SelfLoop => 0,
            EdgeLabel::Local => 1,
            EdgeLabel::Global => 2,
            EdgeLabel::Random => 3,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => EdgeLabel::SelfLoop,
            1 => EdgeLabel::Local,
            2 => EdgeLabel::Global,
            3 => EdgeLabel::Random,
            _ => return None,
        })
    }
}

impl fmt::Display for EdgeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EdgeLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "self" => Ok(EdgeLabel::SelfLoop),
            "local" => Ok(EdgeLabel::Local),
            "global" => Ok(EdgeLabel::Global),
            "random" => Ok(EdgeLabel::Random),
            other => Err(Error::Format(format!("unknown edge label {other:?}"))),
        }
    }
}

/// Generator parameters recorded alongside a graph.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphMeta {
    #[serde(default)]
    pub patterns: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub global_tokens: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_per_token: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl GraphMeta {
    pub(crate) fn pattern(name: &str) -> Self {
        GraphMeta {
            patterns: vec![name.to_string()],
            ..Default::default()
        }
    }

    fn absorb(&mut self, other: &GraphMeta) {
        self.patterns.extend(other.patterns.iter().cloned());
        self.window = self.window.or(other.window);
        self.global_tokens = self.global_tokens.or(other.global_tokens);
        self.random_per_token = self.random_per_token.or(other.random_per_token);
        self.block = self.block.or(other.block);
        self.degree = self.degree.or(other.degree);
        self.seed = self.seed.or(other.seed);
    }
}

/// Directed sparse attention pattern in compressed row form.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionGraph {
    n: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    edge_labels: Vec<EdgeLabel>,
    meta: GraphMeta,
}

impl AttentionGraph {
    /// A graph with `n` nodes and no edges.
    pub fn empty(n: usize) -> Self {
        AttentionGraph {
            n,
            row_offsets: vec![0; n + 1],
            col_indices: Vec::new(),
            edge_labels: Vec::new(),
            meta: GraphMeta::default(),
        }
    }

    /// Build from per-row `(col, label)` lists in any order.
    ///
    /// Duplicate `(row, col)` pairs collapse to the highest-priority label.
    pub fn from_rows(
        n: usize,
        rows: Vec<Vec<(usize, EdgeLabel)>>,
        meta: GraphMeta,
    ) -> Result<Self> {
        if rows.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "expected {n} rows, got {}",
                rows.len()
            )));
        }
        let mut row_offsets = Vec::with_capacity(n + 1);
        let mut col_indices = Vec::new();
        let mut edge_labels = Vec::new();
        row_offsets.push(0);
        for (i, mut row) in rows.into_iter().enumerate() {
            if let Some(&(bad, _)) = row.iter().find(|(c, _)| *c >= n) {
                return Err(invalid(format!("edge ({i}, {bad}) is out of range for n={n}")));
            }
            // Highest label first within equal columns so dedup keeps it.
            row.sort_unstable_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
            row.dedup_by_key(|e| e.0);
            for (c, l) in row {
                col_indices.push(c);
                edge_labels.push(l);
            }
            row_offsets.push(col_indices.len());
        }
        Ok(AttentionGraph {
            n,
            row_offsets,
            col_indices,
            edge_labels,
            meta,
        })
    }

    /// Assemble from raw compressed-row arrays, checking every invariant.
    pub fn from_csr(
        n: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        edge_labels: Vec<EdgeLabel>,
        meta: GraphMeta,
    ) -> Result<Self> {
        if row_offsets.len() != n + 1 || row_offsets[0] != 0 {
            return Err(Error::Format("row offsets must have n+1 entries starting at 0".into()));
        }
        if *row_offsets.last().unwrap() != col_indices.len()
            || col_indices.len() != edge_labels.len()
        {
            return Err(Error::Format("row offsets, columns and labels disagree on nnz".into()));
        }
        for i in 0..n {
            let (lo, hi) = (row_offsets[i], row_offsets[i + 1]);
            if lo > hi {
                return Err(Error::Format(format!("row offsets decrease at row {i}")));
            }
            let row = &col_indices[lo..hi];
            if row.iter().any(|&c| c >= n) {
                return Err(Error::Format(format!("row {i} has a column out of range")));
            }
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Format(format!(
                    "row {i} columns are not strictly increasing"
                )));
            }
        }
        Ok(AttentionGraph {
            n,
            row_offsets,
            col_indices,
            edge_labels,
            meta,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_indices.len()
    }

    pub fn meta(&self) -> &GraphMeta {
        &self.meta
    }

    pub fn with_meta(mut self, meta: GraphMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn edge_labels(&self) -> &[EdgeLabel] {
        &self.edge_labels
    }

    /// Edge index range of row `i`.
    pub fn row_range(&self, i: usize) -> Range<usize> {
        self.row_offsets[i]..self.row_offsets[i + 1]
    }

    /// Neighbors `Ne(i)` in ascending order.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.col_indices[self.row_range(i)]
    }

    pub fn labels(&self, i: usize) -> &[EdgeLabel] {
        &self.edge_labels[self.row_range(i)]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.row_offsets[i + 1] - self.row_offsets[i]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors(i).binary_search(&j).is_ok()
    }

    pub fn label(&self, i: usize, j: usize) -> Option<EdgeLabel> {
        let range = self.row_range(i);
        self.col_indices[range.clone()]
            .binary_search(&j)
            .ok()
            .map(|k| self.edge_labels[range.start + k])
    }

    /// All edges as `(row, col, label)` in row-major order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, EdgeLabel)> + '_ {
        (0..self.n).flat_map(move |i| {
            self.row_range(i)
                .map(move |e| (i, self.col_indices[e], self.edge_labels[e]))
        })
    }

    /// Whether every node carries its self loop.
    pub fn is_finalized(&self) -> bool {
        (0..self.n).all(|i| self.has_edge(i, i))
    }

    /// Insert a self loop labelled `self` on every node.
    pub fn finalize(self) -> Self {
        let mut rows = self.row_lists();
        for (i, row) in rows.iter_mut().enumerate() {
            row.push((i, EdgeLabel::SelfLoop));
        }
        AttentionGraph::from_rows(self.n, rows, self.meta).expect("self loops stay in range")
    }

    /// Dense 0/1 adjacency, `A[(i, j)] = 1` iff edge `(i, j)` exists.
    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n, self.n);
        for (i, j, _) in self.edges() {
            m[(i, j)] = 1.0;
        }
        m
    }

    /// The graph with every edge reversed.
    pub fn transpose(&self) -> Self {
        let mut rows = vec![Vec::new(); self.n];
        for (i, j, l) in self.edges() {
            rows[j].push((i, l));
        }
        AttentionGraph::from_rows(self.n, rows, self.meta.clone()).expect("same node set")
    }

    fn row_lists(&self) -> Vec<Vec<(usize, EdgeLabel)>> {
        (0..self.n)
            .map(|i| self.row_range(i).map(|e| (self.col_indices[e], self.edge_labels[e])).collect())
            .collect()
    }
}

/// Merge patterns over the same `n` tokens.
///
/// Duplicate edges keep the highest-priority label
/// (`self > global > local > random`). Call [`AttentionGraph::finalize`] on
/// the result to add self loops.
pub fn union(n: usize, parts: &[AttentionGraph]) -> Result<AttentionGraph> {
    if let Some(bad) = parts.iter().find(|p| p.n != n) {
        return Err(Error::ShapeMismatch(format!(
            "cannot union a graph on {} nodes into one on {n}",
            bad.n
        )));
    }
    let mut rows: Vec<Vec<(usize, EdgeLabel)>> = vec![Vec::new(); n];
    let mut meta = GraphMeta::default();
    for part in parts {
        meta.absorb(&part.meta);
        for (i, j, l) in part.edges() {
            rows[i].push((j, l));
        }
    }
    AttentionGraph::from_rows(n, rows, meta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_rows_dedups_with_priority() {
        let g = AttentionGraph::from_rows(
            3,
            vec![
                vec![(2, EdgeLabel::Random), (1, EdgeLabel::Local), (2, EdgeLabel::Global)],
                vec![],
                vec![(0, EdgeLabel::Random), (0, EdgeLabel::Random)],
            ],
            GraphMeta::default(),
        )
        .unwrap();
        assert_eq!(g.nnz(), 3);
        assert_eq!(g.neighbors(0), &[1, 2]);
        assert_eq!(g.label(0, 2), Some(EdgeLabel::Global));
        assert_eq!(g.row_offsets(), &[0, 2, 2, 3]);
    }

    #[test]
    fn from_rows_rejects_out_of_range() {
        let err = AttentionGraph::from_rows(2, vec![vec![(2, EdgeLabel::Local)], vec![]], GraphMeta::default());
        assert!(err.is_err());
    }

    #[test]
    fn from_csr_checks_invariants() {
        let meta = GraphMeta::default;
        assert!(AttentionGraph::from_csr(2, vec![0, 1, 2], vec![1, 0], vec![EdgeLabel::Local; 2], meta()).is_ok());
        assert!(AttentionGraph::from_csr(2, vec![0, 2, 2], vec![1, 1], vec![EdgeLabel::Local; 2], meta()).is_err());
        assert!(AttentionGraph::from_csr(2, vec![0, 1, 3], vec![1, 0], vec![EdgeLabel::Local; 2], meta()).is_err());
        assert!(AttentionGraph::from_csr(2, vec![0, 1], vec![1], vec![EdgeLabel::Local], meta()).is_err());
    }

    #[test]
    fn union_of_nothing_finalizes_to_identity() {
        let g = union(5, &[]).unwrap().finalize();
        assert_eq!(g.nnz(), 5);
        assert!(g.edges().all(|(i, j, l)| i == j && l == EdgeLabel::SelfLoop));
    }

    #[test]
    fn union_local_then_finalize() {
        let g = union(8, &[build_local_window(8, 4).unwrap()]).unwrap().finalize();
        assert_eq!(g.nnz(), 34);
        assert!(g.is_finalized());
    }

    #[test]
    fn union_global_dominates_local() {
        let g = union(16, &[build_global(16, 16, 0).unwrap(), build_local_window(16, 4).unwrap()])
            .unwrap();
        assert_eq!(g.nnz(), 256);
        assert!(g.edges().all(|(_, _, l)| l == EdgeLabel::Global));
    }

    #[test]
    fn union_rejects_mismatched_sizes() {
        let a = build_local_window(8, 2).unwrap();
        assert!(matches!(union(9, &[a]), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn finalize_relabels_existing_diagonal() {
        let g = build_global(4, 4, 1).unwrap().finalize();
        assert_eq!(g.nnz(), 16);
        for i in 0..4 {
            assert_eq!(g.label(i, i), Some(EdgeLabel::SelfLoop));
        }
    }

    #[test]
    fn labels_round_trip_through_strings() {
        for l in EdgeLabel::ALL {
            assert_eq!(l.as_str().parse::<EdgeLabel>().unwrap(), l);
            assert_eq!(EdgeLabel::from_code(l.code()), Some(l));
        }
    }
}

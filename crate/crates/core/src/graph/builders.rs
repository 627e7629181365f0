use std::collections::HashSet;

use rand::seq::{index, SliceRandom};

use super::{AttentionGraph, EdgeLabel, GraphMeta};
use crate::error::{invalid, Error, Result};
use crate::seed;

/// Reshuffles per random cycle before [`build_regular_random`] gives up.
pub const REGULAR_RETRY_BUDGET: usize = 1000;

/// Consecutive failed reshuffles of one cycle before all cycles are redrawn.
const RESTART_AFTER: usize = 16;

/// Sliding window: token `i` attends to every `j` with `0 < |i - j| <= w/2`.
pub fn build_local_window(n: usize, w: usize) -> Result<AttentionGraph> {
    if n == 0 {
        return Err(invalid("local window needs at least one token"));
    }
    if w < 2 || w % 2 != 0 {
        return Err(invalid(format!("window size must be even and at least 2, got {w}")));
    }
    if w >= n {
        return Err(invalid(format!("window size {w} must be smaller than n={n}")));
    }
    let half = w / 2;
    let rows = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            (lo..=hi)
                .filter(|&j| j != i)
                .map(|j| (j, EdgeLabel::Local))
                .collect()
        })
        .collect();
    let meta = GraphMeta {
        window: Some(w),
        ..GraphMeta::pattern("local")
    };
    AttentionGraph::from_rows(n, rows, meta)
}

fn full_rows_and_columns(n: usize, tokens: &[usize], meta: GraphMeta) -> Result<AttentionGraph> {
    let mut rows: Vec<Vec<(usize, EdgeLabel)>> = vec![Vec::new(); n];
    for &t in tokens {
        rows[t].extend((0..n).map(|j| (j, EdgeLabel::Global)));
        for (i, row) in rows.iter_mut().enumerate() {
            if i != t {
                row.push((t, EdgeLabel::Global));
            }
        }
    }
    AttentionGraph::from_rows(n, rows, meta)
}

/// `g` global tokens drawn without replacement; each gets a full row and a
/// full column.
pub fn build_global(n: usize, g: usize, seed: u64) -> Result<AttentionGraph> {
    if g > n {
        return Err(invalid(format!("cannot pick {g} global tokens out of {n}")));
    }
    let mut rng = seed::rng(seed);
    let mut tokens = index::sample(&mut rng, n, g).into_vec();
    tokens.sort_unstable();
    let meta = GraphMeta {
        global_tokens: Some(g),
        seed: Some(seed),
        ..GraphMeta::pattern("global")
    };
    full_rows_and_columns(n, &tokens, meta)
}

/// Global attention chosen in units of contiguous blocks.
pub fn build_global_blockwise(
    n: usize,
    blocks: usize,
    block: usize,
    seed: u64,
) -> Result<AttentionGraph> {
    let nb = block_count(n, block)?;
    if blocks > nb {
        return Err(invalid(format!("cannot pick {blocks} global blocks out of {nb}")));
    }
    let mut rng = seed::rng(seed);
    let mut chosen = index::sample(&mut rng, nb, blocks).into_vec();
    chosen.sort_unstable();
    let tokens: Vec<usize> = chosen
        .iter()
        .flat_map(|&b| b * block..(b + 1) * block)
        .collect();
    let meta = GraphMeta {
        global_tokens: Some(tokens.len()),
        block: Some(block),
        seed: Some(seed),
        ..GraphMeta::pattern("global-block")
    };
    full_rows_and_columns(n, &tokens, meta)
}

/// Sample `count` distinct values from `0..total` with `skip` removed.
fn sample_excluding<R: rand::Rng + ?Sized>(
    rng: &mut R,
    total: usize,
    skip: usize,
    count: usize,
) -> impl Iterator<Item = usize> {
    index::sample(rng, total - 1, count)
        .into_iter()
        .map(move |k| if k >= skip { k + 1 } else { k })
}

/// For each query token, `r` distinct keys other than itself. Edges stay
/// directed.
pub fn build_random_tokenwise(n: usize, r: usize, seed: u64) -> Result<AttentionGraph> {
    if r >= n {
        return Err(invalid(format!(
            "random attention needs r < n, got r={r} for n={n}"
        )));
    }
    let threshold = (n as f64).log2().ceil() as usize;
    if r > 0 && r < threshold {
        log::warn!(
            "random attention r={r} is below log2(n)={threshold}; the pattern may not be an expander"
        );
    }
    let mut rng = seed::rng(seed);
    let rows = (0..n)
        .map(|i| {
            sample_excluding(&mut rng, n, i, r)
                .map(|j| (j, EdgeLabel::Random))
                .collect()
        })
        .collect();
    let meta = GraphMeta {
        random_per_token: Some(r),
        seed: Some(seed),
        ..GraphMeta::pattern("random")
    };
    AttentionGraph::from_rows(n, rows, meta)
}

fn block_count(n: usize, block: usize) -> Result<usize> {
    if block == 0 || n % block != 0 {
        return Err(invalid(format!("block size {block} does not divide n={n}")));
    }
    Ok(n / block)
}

/// Block-wise random attention: every query block attends to
/// `blocks_per_row` other key blocks in full.
pub fn build_random_blockwise(
    n: usize,
    blocks_per_row: usize,
    block: usize,
    seed: u64,
) -> Result<AttentionGraph> {
    let nb = block_count(n, block)?;
    if blocks_per_row >= nb {
        return Err(invalid(format!(
            "blocks_per_row={blocks_per_row} must be below the block count {nb}"
        )));
    }
    let mut rng = seed::rng(seed);
    let mut rows: Vec<Vec<(usize, EdgeLabel)>> = vec![Vec::new(); n];
    for qb in 0..nb {
        let keys: Vec<usize> = sample_excluding(&mut rng, nb, qb, blocks_per_row).collect();
        for row in &mut rows[qb * block..(qb + 1) * block] {
            for &kb in &keys {
                row.extend((kb * block..(kb + 1) * block).map(|j| (j, EdgeLabel::Random)));
            }
        }
    }
    let meta = GraphMeta {
        random_per_token: Some(blocks_per_row * block),
        block: Some(block),
        seed: Some(seed),
        ..GraphMeta::pattern("random-block")
    };
    AttentionGraph::from_rows(n, rows, meta)
}

/// Undirected simple `d`-regular graph as the union of `d/2` random
/// Hamiltonian cycles.
///
/// Each cycle is a shuffled token order. Positions whose edge repeats an
/// earlier cycle are swapped with random others until no edge repeats; a
/// cycle that cannot be repaired is reshuffled, and repeated failures
/// redraw every cycle, within [`REGULAR_RETRY_BUDGET`] reshuffles per
/// cycle overall. Both directions of every edge are stored. The first
/// cycle makes the result connected.
pub fn build_regular_random(n: usize, d: usize, seed: u64) -> Result<AttentionGraph> {
    build_regular_random_with_budget(n, d, seed, REGULAR_RETRY_BUDGET)
}

/// [`build_regular_random`] with an explicit per-cycle reshuffle budget.
pub fn build_regular_random_with_budget(
    n: usize,
    d: usize,
    seed: u64,
    budget: usize,
) -> Result<AttentionGraph> {
    if d < 2 || d % 2 != 0 {
        return Err(invalid(format!("degree must be even and at least 2, got {d}")));
    }
    if d >= n {
        return Err(invalid(format!("degree {d} must be smaller than n={n}")));
    }
    let mut rng = seed::rng(seed);
    let mut edges: HashSet<(usize, usize)> = HashSet::with_capacity(n * d / 2);
    let mut order: Vec<usize> = (0..n).collect();
    let cycles = d / 2;
    let total = budget * cycles;
    let mut attempts = 0;
    let (mut placed, mut misses) = (0, 0);
    while placed < cycles {
        if attempts == total {
            return Err(Error::RetryBudgetExhausted {
                n,
                degree: d,
                attempts,
                seed,
            });
        }
        attempts += 1;
        order.shuffle(&mut rng);
        if repair_cycle(&mut order, &edges, &mut rng) {
            edges.extend((0..n).map(|k| cycle_edge(&order, k)));
            placed += 1;
            misses = 0;
        } else {
            misses += 1;
            // Near-complete degrees can leave a remainder with no
            // Hamiltonian cycle at all; start over.
            if misses == RESTART_AFTER {
                edges.clear();
                placed = 0;
                misses = 0;
            }
        }
    }
    let mut rows: Vec<Vec<(usize, EdgeLabel)>> = vec![Vec::with_capacity(d); n];
    for (a, b) in edges {
        rows[a].push((b, EdgeLabel::Random));
        rows[b].push((a, EdgeLabel::Random));
    }
    let meta = GraphMeta {
        degree: Some(d),
        seed: Some(seed),
        ..GraphMeta::pattern("regular")
    };
    AttentionGraph::from_rows(n, rows, meta)
}

fn cycle_edge(order: &[usize], k: usize) -> (usize, usize) {
    let (a, b) = (order[k], order[(k + 1) % order.len()]);
    (a.min(b), a.max(b))
}

/// Swap positions of the cyclic order until none of its edges is already
/// taken. A swap is kept unless it adds collisions; gives up after `8n`
/// proposals.
fn repair_cycle<R: rand::Rng + ?Sized>(
    order: &mut [usize],
    taken: &HashSet<(usize, usize)>,
    rng: &mut R,
) -> bool {
    let n = order.len();
    let hit = |order: &[usize], k: usize| taken.contains(&cycle_edge(order, k));
    let around = |a: usize, b: usize| {
        let mut ks = [(a + n - 1) % n, a, (b + n - 1) % n, b];
        ks.sort_unstable();
        ks
    };
    let count = |order: &[usize], ks: &[usize; 4]| {
        ks.iter()
            .enumerate()
            .filter(|&(i, k)| (i == 0 || ks[i - 1] != *k) && hit(order, *k))
            .count()
    };
    for _ in 0..8 * n {
        let bad: Vec<usize> = (0..n).filter(|&k| hit(order, k)).collect();
        let Some(&k) = bad.get(rng.random_range(0..bad.len().max(1))) else {
            return true;
        };
        let a = (k + 1) % n;
        let b = rng.random_range(0..n);
        if a == b {
            continue;
        }
        let ks = around(a, b);
        let before = count(order, &ks);
        order.swap(a, b);
        if count(order, &ks) > before {
            order.swap(a, b);
        }
    }
    (0..n).all(|k| !hit(order, k))
}

/// Cycle `C_n`, edges `i <-> i±1 mod n`.
pub fn build_ring(n: usize) -> Result<AttentionGraph> {
    if n < 3 {
        return Err(invalid(format!("a ring needs at least 3 nodes, got {n}")));
    }
    let rows = (0..n)
        .map(|i| vec![((i + 1) % n, EdgeLabel::Local), ((i + n - 1) % n, EdgeLabel::Local)])
        .collect();
    AttentionGraph::from_rows(n, rows, GraphMeta::pattern("ring"))
}

/// Complete graph `K_n` without self loops.
pub fn build_complete(n: usize) -> Result<AttentionGraph> {
    if n == 0 {
        return Err(invalid("complete graph needs at least one node"));
    }
    let rows = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| (j, EdgeLabel::Global))
                .collect()
        })
        .collect();
    AttentionGraph::from_rows(n, rows, GraphMeta::pattern("complete"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted_neighbors(g: &AttentionGraph, i: usize) -> Vec<usize> {
        g.neighbors(i).to_vec()
    }

    #[test]
    fn local_window_examples() {
        let g = build_local_window(8, 4).unwrap();
        assert_eq!(sorted_neighbors(&g, 3), vec![1, 2, 4, 5]);
        assert_eq!(g.nnz(), 26);

        let g = build_local_window(3, 2).unwrap();
        assert_eq!(g.neighbors(0), &[1]);
        assert_eq!(g.neighbors(1), &[0, 2]);
        assert_eq!(g.neighbors(2), &[1]);
        assert_eq!(g.nnz(), 4);
    }

    #[test]
    fn local_window_large_density() {
        let g = build_local_window(4096, 64).unwrap();
        assert_eq!(g.degree(2048), 64);
        // 64 per token minus 2 * (32 + 31 + ... + 1) missing at the ends.
        assert_eq!(g.nnz(), 64 * 4096 - 32 * 33);
        let pct = 100.0 * g.nnz() as f64 / (4096.0 * 4096.0);
        assert!((pct - 1.5625).abs() < 0.01, "{pct}");
    }

    #[test]
    fn local_window_rejects_bad_sizes() {
        assert!(build_local_window(8, 3).is_err());
        assert!(build_local_window(8, 8).is_err());
        assert!(build_local_window(0, 2).is_err());
        assert!(build_local_window(8, 0).is_err());
    }

    #[test]
    fn global_examples() {
        assert_eq!(build_global(16, 2, 7).unwrap().nnz(), 2 * 2 * 16 - 4);
        assert_eq!(build_global(16, 0, 7).unwrap().nnz(), 0);
        assert_eq!(build_global(16, 16, 7).unwrap().nnz(), 256);
        assert!(build_global(16, 17, 7).is_err());
    }

    #[test]
    fn global_tokens_have_full_rows_and_columns() {
        let g = build_global(32, 3, 11).unwrap();
        let hubs: Vec<usize> = (0..32).filter(|&i| g.degree(i) == 32).collect();
        assert_eq!(hubs.len(), 3);
        for &h in &hubs {
            assert!((0..32).all(|i| g.has_edge(i, h)));
        }
    }

    #[test]
    fn random_tokenwise_examples() {
        let g = build_random_tokenwise(1024, 20, 1).unwrap();
        assert_eq!(g.nnz(), 20480);
        assert!((0..1024).all(|i| !g.has_edge(i, i) && g.degree(i) == 20));

        assert_eq!(build_random_tokenwise(8, 0, 3).unwrap().nnz(), 0);

        let g = build_random_tokenwise(8, 7, 42).unwrap();
        for i in 0..8 {
            let expect: Vec<usize> = (0..8).filter(|&j| j != i).collect();
            assert_eq!(g.neighbors(i), expect.as_slice());
        }
        assert!(build_random_tokenwise(8, 8, 0).is_err());
    }

    #[test]
    fn random_blockwise_examples() {
        assert_eq!(build_random_blockwise(16, 1, 4, 3).unwrap().nnz(), 64);
        assert_eq!(build_random_blockwise(16, 0, 4, 3).unwrap().nnz(), 0);
        assert!(build_random_blockwise(16, 1, 5, 3).is_err());
        assert!(build_random_blockwise(16, 4, 4, 3).is_err());
    }

    #[test]
    fn blockwise_with_unit_blocks_is_tokenwise() {
        let a = build_random_blockwise(8, 1, 1, 5).unwrap();
        let b = build_random_tokenwise(8, 1, 5).unwrap();
        assert!(a.edges().eq(b.edges()));
    }

    #[test]
    fn regular_random_examples() {
        let g = build_regular_random(64, 8, 2).unwrap();
        assert_eq!(g.nnz(), 512);
        assert!((0..64).all(|i| g.degree(i) == 8 && !g.has_edge(i, i)));

        let g = build_regular_random(4, 2, 0).unwrap();
        assert!((0..4).all(|i| g.degree(i) == 2));
        assert_eq!(g.transpose().col_indices(), g.col_indices());

        assert!(build_regular_random(10, 3, 0).is_err());
        assert!(build_regular_random(4, 4, 0).is_err());
    }

    #[test]
    fn regular_random_dense_degrees() {
        let g = build_regular_random(256, 16, 9).unwrap();
        assert!((0..256).all(|i| g.degree(i) == 16 && !g.has_edge(i, i)));
        assert!(crate::graph::check_assumption(&g).is_connected);
        // Odd complete graphs split into Hamiltonian cycles.
        for n in 3..=15 {
            for d in (2..n).step_by(2) {
                for seed in 0..6 {
                    let g = build_regular_random(n, d, seed).unwrap();
                    assert_eq!(g.nnz(), n * d, "n={n} d={d} seed={seed}");
                }
            }
        }
    }

    #[test]
    fn regular_random_reports_exhausted_budget() {
        match build_regular_random_with_budget(16, 4, 21, 0) {
            Err(Error::RetryBudgetExhausted { seed, attempts, .. }) => {
                assert_eq!((seed, attempts), (21, 0))
            }
            other => panic!("expected exhausted budget, got {other:?}"),
        }
    }

    #[test]
    fn ring_and_complete() {
        let c = build_ring(4).unwrap();
        assert_eq!(c.neighbors(0), &[1, 3]);
        assert_eq!(build_complete(5).unwrap().nnz(), 20);
        assert!(build_ring(2).is_err());
    }
}

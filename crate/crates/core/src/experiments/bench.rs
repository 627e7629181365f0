use std::time::Instant;

use serde_json::json;

use super::{graph_bytes, random_input, ExperimentReport, PatternSpec, TrialRecord};
use crate::diffusion::{diffuse, diffuse_dense, DiffusionConfig, EdgeAttention, DENSE_ORACLE_LIMIT};
use crate::error::{invalid, Result};
use crate::graph::pattern_stats;
use crate::seed;

/// Bytes per stored attention weight.
pub const WEIGHT_BYTES: u64 = 8;

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 0 {
        (xs[m - 1] + xs[m]) / 2.0
    } else {
        xs[m]
    }
}

/// Time `reps` sparse diffusions of uniform attention over the pattern,
/// plus the dense equivalent when `n ≤ 1024`. Storage metrics count one
/// weight per edge against `n²` for dense attention, so `storage_ratio`
/// is exactly `nnz / n²`.
pub fn bench(
    n: usize,
    pattern: &PatternSpec,
    value_dim: usize,
    cfg: &DiffusionConfig,
    reps: usize,
    seeds: &[u64],
) -> Result<ExperimentReport> {
    if reps < 3 {
        return Err(invalid(format!("bench needs at least 3 repetitions, got {reps}")));
    }
    if value_dim == 0 {
        return Err(invalid("value width must be positive"));
    }
    cfg.validate()?;
    let start = Instant::now();
    let mut trials = Vec::with_capacity(seeds.len());
    let mut max_nnz = 0;
    // Serial: concurrent runs would distort each other's timings.
    for &s in seeds {
        let g = pattern.build(n, seed::derive(s, "pattern", 0))?;
        let stats = pattern_stats(&g);
        let a = EdgeAttention::uniform(&g)?;
        let v = random_input(n, value_dim, seed::derive(s, "values", 0));
        let mut times = Vec::with_capacity(reps);
        for _ in 0..reps {
            let t = Instant::now();
            std::hint::black_box(diffuse(&a, &v, cfg)?);
            times.push(t.elapsed().as_secs_f64());
        }
        let sparse_bytes = g.nnz() as u64 * WEIGHT_BYTES;
        let dense_bytes = (n * n) as u64 * WEIGHT_BYTES;
        let mut metrics = std::collections::BTreeMap::from([
            ("nnz".to_string(), g.nnz() as f64),
            ("pct_total".to_string(), stats.pct_total),
            ("storage_bytes".to_string(), sparse_bytes as f64),
            ("dense_storage_bytes".to_string(), dense_bytes as f64),
            ("storage_ratio".to_string(), g.nnz() as f64 / (n * n) as f64),
            ("seconds_sparse".to_string(), median(times)),
        ]);
        if n <= DENSE_ORACLE_LIMIT {
            let dense = a.to_dense();
            let mut times = Vec::with_capacity(reps);
            for _ in 0..reps {
                let t = Instant::now();
                std::hint::black_box(diffuse_dense(&dense, &v, cfg)?);
                times.push(t.elapsed().as_secs_f64());
            }
            metrics.insert("seconds_dense".to_string(), median(times));
        }
        max_nnz = max_nnz.max(g.nnz());
        trials.push(TrialRecord { seed: s, metrics });
    }
    let peak = graph_bytes(n, max_nnz) + max_nnz as u64 * WEIGHT_BYTES
        + (2 * n * value_dim) as u64 * 8;
    let parameters = json!({
        "n": n,
        "pattern": pattern,
        "value_dim": value_dim,
        "alpha": cfg.alpha(),
        "steps": cfg.steps(),
        "reps": reps,
        "seeds": seeds,
    });
    Ok(ExperimentReport::new("bench", parameters, trials, start.elapsed().as_secs_f64(), peak))
}

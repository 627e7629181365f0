use std::collections::BTreeMap;
use std::time::Instant;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde_json::json;

use super::{graph_bytes, ExperimentReport, PatternSpec, TrialRecord};
use crate::diffusion::DiffusionConfig;
use crate::error::{invalid, Error, Result};
use crate::layer::{diffuser_layer_forward, LayerParams, LayerShape};
use crate::seed;
use crate::Matrix;

/// Deviation the complete-graph control may show before sparse results are
/// reported.
pub const ROLL_CONTROL_TOLERANCE: f64 = 1e-10;

/// Cyclic shift of the rows: `roll(X, s)[i] = X[(i - s) mod n]`.
pub fn roll(x: &Matrix, shift: usize) -> Matrix {
    let n = x.nrows();
    Matrix::from_fn(n, x.ncols(), |i, j| x[((i + n - shift % n.max(1)) % n.max(1), j)])
}

/// `‖roll(layer(X), s) - layer(roll(X, s))‖_F / ‖layer(X)‖_F`.
pub fn roll_deviation(
    x: &Matrix,
    params: &LayerParams,
    graph: &crate::graph::AttentionGraph,
    cfg: &DiffusionConfig,
    shift: usize,
) -> Result<f64> {
    let n = x.nrows();
    if shift >= n {
        return Err(invalid(format!("shift {shift} must be smaller than n = {n}")));
    }
    let y = diffuser_layer_forward(x, params, graph, cfg)?;
    if shift == 0 {
        return Ok(0.0);
    }
    let ys = diffuser_layer_forward(&roll(x, shift), params, graph, cfg)?;
    let norm = y.norm();
    if norm == 0.0 {
        return Ok(0.0);
    }
    Ok((roll(&y, shift) - ys).norm() / norm)
}

/// Input `X` with standard normal entries.
pub fn random_input(n: usize, d: usize, seed: u64) -> Matrix {
    let mut rng = seed::rng(seed);
    let mut x = Matrix::zeros(n, d);
    for i in 0..n {
        for j in 0..d {
            x[(i, j)] = StandardNormal.sample(&mut rng);
        }
    }
    x
}

/// For every seed, draw layer weights, an input and the pattern, then
/// report `shift_<s>` deviations for the pattern and `control_shift_<s>`
/// for the complete graph. A control above [`ROLL_CONTROL_TOLERANCE`] is a
/// numerical failure.
pub fn roll_robustness(
    n: usize,
    shape: LayerShape,
    pattern: &PatternSpec,
    cfg: &DiffusionConfig,
    shifts: &[usize],
    seeds: &[u64],
) -> Result<ExperimentReport> {
    if let Some(s) = shifts.iter().find(|&&s| s >= n) {
        return Err(invalid(format!("shift {s} must be smaller than n = {n}")));
    }
    cfg.validate()?;
    let start = Instant::now();
    let complete = PatternSpec::complete().build(n, 0)?;
    let trials = seeds
        .par_iter()
        .map(|&s| -> Result<(TrialRecord, usize)> {
            let params = LayerParams::random(shape, seed::derive(s, "layer", 0));
            let x = random_input(n, shape.d, seed::derive(s, "input", 0));
            let graph = pattern.build(n, seed::derive(s, "pattern", 0))?;
            let mut metrics = BTreeMap::new();
            for &shift in shifts {
                let control = roll_deviation(&x, &params, &complete, cfg, shift)?;
                if control > ROLL_CONTROL_TOLERANCE {
                    return Err(Error::ToleranceBreach {
                        what: format!("complete-graph roll control at shift {shift}, seed {s}"),
                        value: control,
                        tolerance: ROLL_CONTROL_TOLERANCE,
                    });
                }
                metrics.insert(format!("control_shift_{shift}"), control);
                let dev = roll_deviation(&x, &params, &graph, cfg, shift)?;
                metrics.insert(format!("shift_{shift}"), dev);
            }
            Ok((TrialRecord { seed: s, metrics }, graph.nnz()))
        })
        .collect::<Result<Vec<_>>>()?;
    let max_nnz = trials.iter().map(|t| t.1).max().unwrap_or(0).max(complete.nnz());
    let peak = graph_bytes(n, max_nnz) + (shape.heads * max_nnz * 8) as u64;
    let parameters = json!({
        "n": n,
        "layer": shape,
        "pattern": pattern,
        "alpha": cfg.alpha(),
        "steps": cfg.steps(),
        "shifts": shifts,
        "seeds": seeds,
    });
    Ok(ExperimentReport::new(
        "roll_robustness",
        parameters,
        trials.into_iter().map(|t| t.0).collect(),
        start.elapsed().as_secs_f64(),
        peak,
    ))
}

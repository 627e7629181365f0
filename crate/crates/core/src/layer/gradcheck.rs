use serde::Serialize;

use super::{diffuser_layer_forward, diffuser_layer_forward_cached, layer_backward, LayerParams};
use crate::diffusion::DiffusionConfig;
use crate::error::{invalid, Result};
use crate::graph::AttentionGraph;
use crate::Matrix;

/// Largest sequence [`grad_check`] accepts; it runs two forwards per scalar.
pub const GRAD_CHECK_LIMIT: usize = 64;

/// Denominator floor of the relative error, so gradients that vanish
/// compare by absolute error.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Tensor holding the worst entry (`x` for the input).
    pub worst: String,
    pub checked: usize,
    pub eps: f64,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_ERROR_FLOOR)
}

/// Compare analytic gradients of `L = Σ layer(X)` against central
/// differences `(L(θ+ε) - L(θ-ε)) / 2ε` for every weight and input entry.
pub fn grad_check(
    params: &LayerParams,
    graph: &AttentionGraph,
    cfg: &DiffusionConfig,
    x: &Matrix,
    eps: f64,
) -> Result<GradCheckReport> {
    grad_check_excluding(params, graph, cfg, x, eps, &[])
}

/// [`grad_check`] without the named tensors (e.g. `"w_1"` when every ReLU
/// input sits on the kink at zero and the loss has no derivative there).
pub fn grad_check_excluding(
    params: &LayerParams,
    graph: &AttentionGraph,
    cfg: &DiffusionConfig,
    x: &Matrix,
    eps: f64,
    skip: &[&str],
) -> Result<GradCheckReport> {
    if graph.n() > GRAD_CHECK_LIMIT {
        return Err(invalid(format!(
            "gradient check limited to n ≤ {GRAD_CHECK_LIMIT}, got {}",
            graph.n()
        )));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(invalid(format!("finite-difference step must be positive, got {eps}")));
    }
    let shape = params.shape()?;
    let cache = diffuser_layer_forward_cached(x, params, graph, cfg)?;
    let ones = Matrix::from_element(cache.output.nrows(), cache.output.ncols(), 1.0);
    let grads = layer_backward(&cache, params, graph, cfg, &ones)?;

    let loss = |p: &LayerParams, x: &Matrix| -> Result<f64> {
        Ok(diffuser_layer_forward(x, p, graph, cfg)?.sum())
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: String::new(),
        checked: 0,
        eps,
    };
    let mut record = |name: &str, analytic: f64, numeric: f64| {
        let err = relative_error(analytic, numeric);
        if err > report.max_rel_error || report.checked == 0 {
            report.max_rel_error = err.max(report.max_rel_error);
            report.worst = name.to_string();
        }
        report.checked += 1;
    };

    let flat = params.to_flat();
    let analytic = grads.params.to_flat();
    let names: Vec<(String, usize)> = params
        .tensors()
        .into_iter()
        .map(|(name, m)| (name, m.len()))
        .collect();
    let mut owner = names.iter().flat_map(|(name, len)| std::iter::repeat(name).take(*len));
    let mut probe = flat.clone();
    for k in 0..flat.len() {
        let name = owner.next().expect("one name per scalar");
        if skip.contains(&name.as_str()) {
            continue;
        }
        probe[k] = flat[k] + eps;
        let plus = loss(&LayerParams::from_flat(shape, &probe)?, x)?;
        probe[k] = flat[k] - eps;
        let minus = loss(&LayerParams::from_flat(shape, &probe)?, x)?;
        probe[k] = flat[k];
        record(name, analytic[k], (plus - minus) / (2.0 * eps));
    }

    if skip.contains(&"x") {
        return Ok(report);
    }
    let mut xp = x.clone();
    for idx in 0..x.len() {
        let orig = x[idx];
        xp[idx] = orig + eps;
        let plus = loss(params, &xp)?;
        xp[idx] = orig - eps;
        let minus = loss(params, &xp)?;
        xp[idx] = orig;
        record("x", grads.x[idx], (plus - minus) / (2.0 * eps));
    }
    Ok(report)
}

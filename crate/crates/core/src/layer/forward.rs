use super::{HeadParams, LayerParams, LayerShape};
use crate::diffusion::{diffuse_trajectory, DiffusionConfig, EdgeAttention};
use crate::error::{invalid, Error, Result};
use crate::graph::AttentionGraph;
use crate::numeric::all_finite;
use crate::Matrix;

/// Logit scale `√d` for model width `d`.
pub fn attention_scale(d: usize) -> f64 {
    (d as f64).sqrt()
}

pub(crate) fn check_input(x: &Matrix, shape: &LayerShape, n: usize) -> Result<()> {
    if x.shape() != (n, shape.d) {
        return Err(Error::ShapeMismatch(format!(
            "input is {}×{}, expected {n}×{}",
            x.nrows(),
            x.ncols(),
            shape.d
        )));
    }
    if !all_finite(x) {
        return Err(invalid("input contains non-finite entries"));
    }
    Ok(())
}

/// `Q = X W_Q`, `K = X W_K`, `V = X W_V`.
pub fn project_qkv(x: &Matrix, head: &HeadParams) -> Result<(Matrix, Matrix, Matrix)> {
    for (name, w) in [("w_q", &head.w_q), ("w_k", &head.w_k), ("w_v", &head.w_v)] {
        if w.nrows() != x.ncols() {
            return Err(Error::ShapeMismatch(format!(
                "{name} has {} rows, input has {} columns",
                w.nrows(),
                x.ncols()
            )));
        }
    }
    Ok((x * &head.w_q, x * &head.w_k, x * &head.w_v))
}

/// Per-row softmax of `Q_i · K_j / scale` over the neighbors of `i`.
///
/// Each row subtracts its largest logit before exponentiating, so logits of
/// any finite magnitude are safe.
pub fn sparse_attention_scores<'g>(
    q: &Matrix,
    k: &Matrix,
    graph: &'g AttentionGraph,
    scale: f64,
) -> Result<EdgeAttention<'g>> {
    let n = graph.n();
    if q.nrows() != n || k.nrows() != n || q.ncols() != k.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "queries {}×{} and keys {}×{} over {n} tokens",
            q.nrows(),
            q.ncols(),
            k.nrows(),
            k.ncols()
        )));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(invalid(format!("logit scale must be positive, got {scale}")));
    }
    let (qt, kt) = (q.transpose(), k.transpose());
    let mut weights = Vec::with_capacity(graph.nnz());
    for i in 0..n {
        let cols = graph.neighbors(i);
        if cols.is_empty() {
            return Err(Error::EmptyRow(i));
        }
        let qi = qt.column(i);
        let start = weights.len();
        weights.extend(cols.iter().map(|&j| qi.dot(&kt.column(j)) / scale));
        let row = &mut weights[start..];
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for w in row.iter_mut() {
            *w = (*w - max).exp();
            sum += *w;
        }
        for w in row.iter_mut() {
            *w /= sum;
        }
    }
    EdgeAttention::new(graph, weights)
}

/// Intermediate values of one head, kept for the backward pass.
#[derive(Clone, Debug)]
pub struct HeadCache {
    pub q: Matrix,
    pub k: Matrix,
    pub v: Matrix,
    /// Edge attention weights, aligned with the graph's edges.
    pub weights: Vec<f64>,
    /// `Z_0 ..= Z_K`.
    pub trajectory: Vec<Matrix>,
}

impl HeadCache {
    pub fn output(&self) -> &Matrix {
        self.trajectory.last().expect("trajectory holds Z_0")
    }
}

pub(crate) fn head_forward_cached(
    x: &Matrix,
    head: &HeadParams,
    graph: &AttentionGraph,
    cfg: &DiffusionConfig,
    scale: f64,
) -> Result<HeadCache> {
    let (q, k, v) = project_qkv(x, head)?;
    let attention = sparse_attention_scores(&q, &k, graph, scale)?;
    let trajectory = diffuse_trajectory(&attention, &v, cfg)?;
    let weights = attention.weights().to_vec();
    Ok(HeadCache {
        q,
        k,
        v,
        weights,
        trajectory,
    })
}

/// One head: edge softmax, then `K` diffusion steps over the values.
pub fn diffuser_head_forward(
    x: &Matrix,
    head: &HeadParams,
    graph: &AttentionGraph,
    cfg: &DiffusionConfig,
) -> Result<Matrix> {
    let cache = head_forward_cached(x, head, graph, cfg, attention_scale(x.ncols()))?;
    Ok(cache.output().clone())
}

/// Everything the backward pass needs from a forward evaluation.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    pub x: Matrix,
    pub heads: Vec<HeadCache>,
    /// Head outputs side by side, `n × (h·m)`.
    pub concat: Matrix,
    /// `U = X + concat · W_O`.
    pub residual: Matrix,
    /// `U · W_1` before the ReLU.
    pub pre_activation: Matrix,
    pub output: Matrix,
}

pub(crate) fn merge_heads(outputs: &[&Matrix], n: usize, m: usize) -> Matrix {
    let mut concat = Matrix::zeros(n, outputs.len() * m);
    for (h, out) in outputs.iter().enumerate() {
        concat.columns_mut(h * m, m).copy_from(out);
    }
    concat
}

/// `U = X + concat·W_O`, then `U + ReLU(U·W_1)·W_2`. Returns
/// `(U, U·W_1, output)`.
pub(crate) fn residual_feed_forward(
    x: &Matrix,
    concat: &Matrix,
    params: &LayerParams,
) -> (Matrix, Matrix, Matrix) {
    let residual = x + concat * &params.w_o;
    let pre = &residual * &params.w_1;
    let act = pre.map(|v| v.max(0.0));
    let output = &residual + act * &params.w_2;
    (residual, pre, output)
}

/// Forward pass that keeps its intermediates.
pub fn diffuser_layer_forward_cached(
    x: &Matrix,
    params: &LayerParams,
    graph: &AttentionGraph,
    cfg: &DiffusionConfig,
) -> Result<ForwardCache> {
    let shape = params.shape()?;
    check_input(x, &shape, graph.n())?;
    let scale = attention_scale(shape.d);
    let heads = params
        .heads
        .iter()
        .map(|head| head_forward_cached(x, head, graph, cfg, scale))
        .collect::<Result<Vec<_>>>()?;
    let outputs: Vec<&Matrix> = heads.iter().map(HeadCache::output).collect();
    let concat = merge_heads(&outputs, graph.n(), shape.head_dim);
    let (residual, pre_activation, output) = residual_feed_forward(x, &concat, params);
    Ok(ForwardCache {
        x: x.clone(),
        heads,
        concat,
        residual,
        pre_activation,
        output,
    })
}

/// Full layer: heads, merge through `W_O`, residual, ReLU feed-forward,
/// residual. No normalization layers.
pub fn diffuser_layer_forward(
    x: &Matrix,
    params: &LayerParams,
    graph: &AttentionGraph,
    cfg: &DiffusionConfig,
) -> Result<Matrix> {
    Ok(diffuser_layer_forward_cached(x, params, graph, cfg)?.output)
}

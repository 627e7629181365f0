use super::forward::{attention_scale, ForwardCache, HeadCache};
use super::{HeadParams, LayerParams, LayerShape};
use crate::diffusion::DiffusionConfig;
use crate::error::{Error, Result};
use crate::graph::AttentionGraph;
use crate::Matrix;

/// Gradients of a scalar loss with respect to the input and every weight.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerGradients {
    pub x: Matrix,
    pub params: LayerParams,
}

fn check_cache(
    cache: &ForwardCache,
    shape: &LayerShape,
    graph: &AttentionGraph,
    cfg: &DiffusionConfig,
) -> Result<()> {
    let n = graph.n();
    let consistent = cache.x.shape() == (n, shape.d)
        && cache.heads.len() == shape.heads
        && cache.heads.iter().all(|h| {
            h.weights.len() == graph.nnz()
                && h.trajectory.len() == cfg.steps() + 1
                && h.v.shape() == (n, shape.head_dim)
        })
        && cache.output.shape() == (n, shape.d);
    if consistent {
        Ok(())
    } else {
        Err(Error::InvalidParameter(
            "forward cache does not belong to this layer, graph and config".into(),
        ))
    }
}

/// Reverse-mode through one head. `grad_out` is `∂L/∂Z_K`. Returns the
/// head's weight gradients and its contribution to `∂L/∂X`.
fn head_backward(
    x: &Matrix,
    head: &HeadParams,
    cache: &HeadCache,
    graph: &AttentionGraph,
    cfg: &DiffusionConfig,
    scale: f64,
    grad_out: Matrix,
) -> (HeadParams, Matrix) {
    let n = graph.n();
    let alpha = cfg.alpha();
    let keep = 1.0 - alpha;
    let cols = graph.col_indices();

    // Unroll Z_{k+1} = (1-α) A Z_k + α V from the last step back.
    let mut g_z = grad_out;
    let mut g_v = Matrix::zeros(n, g_z.ncols());
    let mut g_a = vec![0.0; graph.nnz()];
    for k in (0..cfg.steps()).rev() {
        g_v += alpha * &g_z;
        let z_prev = &cache.trajectory[k];
        let mut g_prev = Matrix::zeros(n, g_z.ncols());
        for i in 0..n {
            let gi = g_z.row(i);
            for e in graph.row_range(i) {
                let j = cols[e];
                g_a[e] += keep * gi.dot(&z_prev.row(j));
                let w = keep * cache.weights[e];
                for c in 0..gi.len() {
                    g_prev[(j, c)] += w * gi[c];
                }
            }
        }
        g_z = g_prev;
    }
    g_v += &g_z;

    // Row softmax: ∂s_e = a_e (∂a_e - Σ_row a ∂a).
    let mut g_q = Matrix::zeros(n, cache.q.ncols());
    let mut g_k = Matrix::zeros(n, cache.k.ncols());
    for i in 0..n {
        let range = graph.row_range(i);
        let dot: f64 = range.clone().map(|e| cache.weights[e] * g_a[e]).sum();
        for e in range {
            let g_s = cache.weights[e] * (g_a[e] - dot) / scale;
            if g_s == 0.0 {
                continue;
            }
            let j = cols[e];
            for c in 0..g_q.ncols() {
                g_q[(i, c)] += g_s * cache.k[(j, c)];
                g_k[(j, c)] += g_s * cache.q[(i, c)];
            }
        }
    }

    let xt = x.transpose();
    let grads = HeadParams {
        w_q: &xt * &g_q,
        w_k: &xt * &g_k,
        w_v: &xt * &g_v,
    };
    let g_x = g_q * head.w_q.transpose() + g_k * head.w_k.transpose() + g_v * head.w_v.transpose();
    (grads, g_x)
}

/// Exact gradients of `⟨upstream, layer(X)⟩` for the forward pass recorded
/// in `cache`. The diffusion recursion is unrolled step by step.
pub fn layer_backward(
    cache: &ForwardCache,
    params: &LayerParams,
    graph: &AttentionGraph,
    cfg: &DiffusionConfig,
    upstream: &Matrix,
) -> Result<LayerGradients> {
    let shape = params.shape()?;
    check_cache(cache, &shape, graph, cfg)?;
    if upstream.shape() != cache.output.shape() {
        return Err(Error::ShapeMismatch(format!(
            "upstream gradient is {}×{}, output is {}×{}",
            upstream.nrows(),
            upstream.ncols(),
            cache.output.nrows(),
            cache.output.ncols()
        )));
    }

    // Y = U + ReLU(U W_1) W_2
    let act = cache.pre_activation.map(|v| v.max(0.0));
    let w_2 = act.transpose() * upstream;
    let mut g_pre = upstream * params.w_2.transpose();
    g_pre.zip_apply(&cache.pre_activation, |g, p| {
        if p <= 0.0 {
            *g = 0.0
        }
    });
    let w_1 = cache.residual.transpose() * &g_pre;
    let g_u = upstream + g_pre * params.w_1.transpose();

    // U = X + C W_O
    let w_o = cache.concat.transpose() * &g_u;
    let g_c = &g_u * params.w_o.transpose();
    let mut g_x = g_u;

    let scale = attention_scale(shape.d);
    let m = shape.head_dim;
    let mut heads = Vec::with_capacity(shape.heads);
    for (h, (head, head_cache)) in params.heads.iter().zip(&cache.heads).enumerate() {
        let grad_out = g_c.columns(h * m, m).clone_owned();
        let (grads, g_xh) = head_backward(&cache.x, head, head_cache, graph, cfg, scale, grad_out);
        g_x += g_xh;
        heads.push(grads);
    }
    Ok(LayerGradients {
        x: g_x,
        params: LayerParams {
            heads,
            w_o,
            w_1,
            w_2,
        },
    })
}

use super::forward::{attention_scale, check_input, merge_heads, residual_feed_forward};
use super::LayerParams;
use crate::diffusion::{diffuse_dense, exact_diffusion, DiffusionConfig};
use crate::error::{invalid, Error, Result};
use crate::Matrix;

/// Largest sequence the dense reference accepts.
pub const DENSE_REFERENCE_LIMIT: usize = 512;

/// How the dense reference propagates values.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DenseDiffusion {
    /// The same `K`-step recursion as the sparse path.
    Truncated,
    /// The exact operator `α (I - (1-α) A)^-1` applied by a linear solve.
    Exact,
}

/// Row softmax of `Q Kᵀ / scale` restricted to the non-zero entries of
/// `mask`, as a dense `n × n` matrix.
pub fn masked_softmax(q: &Matrix, k: &Matrix, mask: &Matrix, scale: f64) -> Result<Matrix> {
    let logits = q * k.transpose() / scale;
    let n = logits.nrows();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        let mut max = f64::NEG_INFINITY;
        for j in 0..n {
            if mask[(i, j)] != 0.0 {
                max = max.max(logits[(i, j)]);
            }
        }
        if max == f64::NEG_INFINITY {
            return Err(Error::EmptyRow(i));
        }
        let mut sum = 0.0;
        for j in 0..n {
            if mask[(i, j)] != 0.0 {
                let e = (logits[(i, j)] - max).exp();
                out[(i, j)] = e;
                sum += e;
            }
        }
        for j in 0..n {
            out[(i, j)] /= sum;
        }
    }
    Ok(out)
}

/// Dense counterpart of [`diffuser_layer_forward`](super::diffuser_layer_forward).
///
/// Materializes every attention matrix as `n × n`, runs either the same
/// truncated recursion or the exact resolvent, then the identical merge and
/// feed-forward. With [`DenseDiffusion::Truncated`] the two paths differ only
/// in storage and summation order.
pub fn dense_reference_forward(
    x: &Matrix,
    params: &LayerParams,
    mask: &Matrix,
    cfg: &DiffusionConfig,
    mode: DenseDiffusion,
) -> Result<Matrix> {
    let shape = params.shape()?;
    let n = x.nrows();
    if n > DENSE_REFERENCE_LIMIT {
        return Err(invalid(format!(
            "dense reference limited to n ≤ {DENSE_REFERENCE_LIMIT}, got {n}"
        )));
    }
    if mask.shape() != (n, n) {
        return Err(Error::ShapeMismatch(format!(
            "mask is {}×{}, expected {n}×{n}",
            mask.nrows(),
            mask.ncols()
        )));
    }
    check_input(x, &shape, n)?;
    let scale = attention_scale(shape.d);
    let mut outputs = Vec::with_capacity(shape.heads);
    for head in &params.heads {
        let (q, k, v) = (x * &head.w_q, x * &head.w_k, x * &head.w_v);
        let a = masked_softmax(&q, &k, mask, scale)?;
        let out = match mode {
            DenseDiffusion::Truncated => diffuse_dense(&a, &v, cfg)?,
            DenseDiffusion::Exact => exact_diffusion(&a, &v, cfg.alpha())?,
        };
        outputs.push(out);
    }
    let refs: Vec<&Matrix> = outputs.iter().collect();
    let concat = merge_heads(&refs, n, shape.head_dim);
    Ok(residual_feed_forward(x, &concat, params).2)
}

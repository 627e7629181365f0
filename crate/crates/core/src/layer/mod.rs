//! The attention-diffusion layer.
//!
//! For each head the layer projects `Q = XW_Q`, `K = XW_K`, `V = XW_V`,
//! scores every edge of the pattern with a row softmax of `Q_i·K_j/√d`,
//! and diffuses `V` over that attention for `K` steps. Head outputs are
//! concatenated and mapped through `W_O`; a residual connection and a ReLU
//! feed-forward block with its own residual finish the layer:
//!
//! ```text
//! U = X + cat(head_1, .., head_h) W_O
//! Y = U + ReLU(U W_1) W_2
//! ```
//!
//! Biases and normalization layers are left out. A pre-LN variant would
//! normalize `X` before the projections and `U` before `W_1`.

mod backward;
mod dense;
mod forward;
mod gradcheck;
mod params;

pub use backward::{layer_backward, LayerGradients};
pub use dense::{dense_reference_forward, masked_softmax, DenseDiffusion, DENSE_REFERENCE_LIMIT};
pub use forward::{
    attention_scale, diffuser_head_forward, diffuser_layer_forward,
    diffuser_layer_forward_cached, project_qkv, sparse_attention_scores, ForwardCache, HeadCache,
};
pub use gradcheck::{grad_check, grad_check_excluding, relative_error, GradCheckReport, GRAD_CHECK_LIMIT, RELATIVE_ERROR_FLOOR};
pub use params::{load_checkpoint, save_checkpoint, CheckpointManifest, HeadParams, LayerParams, LayerShape};

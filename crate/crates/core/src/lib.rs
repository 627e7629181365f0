//! Sparse attention with attention diffusion.
//!
//! The crate is organized around four pieces:
//!
//! * [`graph`]: sparse attention patterns (local window, global tokens,
//!   token-wise and block-wise random attention, random regular graphs) in
//!   compressed row form, with sparsity statistics and connectivity checks.
//! * [`diffusion`]: personalized-PageRank attention diffusion over a
//!   row-stochastic edge attention, the exact resolvent operator used as an
//!   oracle, and the truncation error accounting for `K` propagation steps.
//! * [`layer`]: a full multi-head attention layer that scores the edges of a
//!   pattern, diffuses per head, merges heads and applies a residual
//!   feed-forward block. Ships with a dense reference path and an exact
//!   reverse-mode backward pass.
//! * [`spectral`]: Laplacian and adjacency spectra of patterns, expander
//!   metrics, Cheeger bounds, mixing curves and the eigenvalue map of the
//!   diffusion operator.
//!
//! [`experiments`] wires these into seeded, reproducible runs that write JSON
//! reports and CSV tables.
//!
//! ```
//! use diffuser::diffusion::{diffuse, DiffusionConfig, EdgeAttention};
//! use diffuser::graph::{build_local_window, union, AttentionGraph};
//! use diffuser::Matrix;
//!
//! let graph = union(16, &[build_local_window(16, 4)?])?.finalize();
//! let attention = EdgeAttention::uniform(&graph)?;
//! let values = Matrix::from_fn(16, 2, |i, j| (i + j) as f64);
//! let out = diffuse(&attention, &values, &DiffusionConfig::new(0.1, 5)?)?;
//! assert_eq!(out.shape(), (16, 2));
//! # Ok::<(), diffuser::Error>(())
//! ```

pub mod diffusion;
pub mod error;
pub mod experiments;
pub mod graph;
pub mod io;
pub mod layer;
pub mod numeric;
pub mod seed;
pub mod spectral;

pub use error::{Error, Result};

/// Dense real matrix used for token features, projections and oracles.
pub type Matrix = nalgebra::DMatrix<f64>;

//! The guide under `book/` as doctests, one module per chapter, so every
//! listing compiles and runs with `cargo test`.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/patterns.md")]
pub mod patterns {}

#[doc = include_str!("../../../book/src/diffusion.md")]
pub mod diffusion {}

#[doc = include_str!("../../../book/src/layer.md")]
pub mod layer {}

#[doc = include_str!("../../../book/src/spectral.md")]
pub mod spectral {}

#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::graph::{
    build_complete, build_global, build_global_blockwise, build_local_window,
    build_random_blockwise, build_random_tokenwise, build_regular_random, build_ring, union,
    AttentionGraph,
};
use crate::seed;

/// Global or random attention chosen per token or in contiguous blocks.
///
/// Token-wise, `count` is the number of tokens; block-wise it is the number
/// of blocks of `block` tokens.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Selection {
    pub count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block: Option<usize>,
}

impl Selection {
    pub fn tokens(count: usize) -> Self {
        Selection { count, block: None }
    }

    pub fn blocks(count: usize, block: usize) -> Self {
        Selection {
            count,
            block: Some(block),
        }
    }
}

/// Declarative attention pattern: any mix of a local window, global and
/// random attention, or one of the whole-graph shapes. Building always adds
/// self loops.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub global: Option<Selection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random: Option<Selection>,
    /// Degree of a random regular graph.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regular: Option<usize>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub ring: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub complete: bool,
}

impl PatternSpec {
    pub fn complete() -> Self {
        PatternSpec {
            complete: true,
            ..Default::default()
        }
    }

    pub fn local(w: usize) -> Self {
        PatternSpec {
            window: Some(w),
            ..Default::default()
        }
    }

    /// Window, token-wise global and token-wise random attention.
    pub fn diffuser(w: usize, g: usize, r: usize) -> Self {
        PatternSpec {
            window: Some(w),
            global: Some(Selection::tokens(g)),
            random: Some(Selection::tokens(r)),
            ..Default::default()
        }
    }

    /// Window and token-wise global attention, with the random budget `r`
    /// spent on a wider window instead.
    pub fn longformer(w: usize, g: usize, r: usize) -> Self {
        PatternSpec {
            window: Some(w + r),
            global: Some(Selection::tokens(g)),
            ..Default::default()
        }
    }

    /// Window plus block-wise global and random attention; `g` and `r` are
    /// token budgets and must be multiples of `block`.
    pub fn bigbird(w: usize, g: usize, r: usize, block: usize) -> Self {
        PatternSpec {
            window: Some(w),
            global: Some(Selection::blocks(g / block.max(1), block)),
            random: Some(Selection::blocks(r / block.max(1), block)),
            ..Default::default()
        }
    }

    /// Named presets at matched edge budgets: `diffuser`, `longformer`,
    /// `bigbird`, `complete`.
    pub fn preset(name: &str, w: usize, g: usize, r: usize, block: usize) -> Result<Self> {
        Ok(match name {
            "diffuser" => Self::diffuser(w, g, r),
            "longformer" => Self::longformer(w, g, r),
            "bigbird" => Self::bigbird(w, g, r, block),
            "complete" | "full" => Self::complete(),
            _ => return Err(invalid(format!("unknown pattern preset {name:?}"))),
        })
    }

    /// Build on `n` tokens. Each component draws from its own stream of
    /// `seed`, so removing one component leaves the others unchanged.
    pub fn build(&self, n: usize, seed: u64) -> Result<AttentionGraph> {
        let shapes = [self.complete, self.ring, self.regular.is_some()];
        let whole = shapes.iter().filter(|s| **s).count();
        let parts_given = self.window.is_some() || self.global.is_some() || self.random.is_some();
        if whole > 1 || (whole == 1 && parts_given) {
            return Err(invalid("complete, ring and regular patterns cannot be combined with others"));
        }
        let mut parts = Vec::new();
        if self.complete {
            parts.push(build_complete(n)?);
        }
        if self.ring {
            parts.push(build_ring(n)?);
        }
        if let Some(d) = self.regular {
            parts.push(build_regular_random(n, d, seed::derive(seed, "regular", 0))?);
        }
        if let Some(w) = self.window {
            parts.push(build_local_window(n, w)?);
        }
        if let Some(sel) = self.global {
            let s = seed::derive(seed, "global", 0);
            parts.push(match sel.block {
                None => build_global(n, sel.count, s)?,
                Some(b) => build_global_blockwise(n, sel.count, b, s)?,
            });
        }
        if let Some(sel) = self.random {
            let s = seed::derive(seed, "random", 0);
            parts.push(match sel.block {
                None => build_random_tokenwise(n, sel.count, s)?,
                Some(b) => build_random_blockwise(n, sel.count, b, s)?,
            });
        }
        Ok(union(n, &parts)?.finalize())
    }
}

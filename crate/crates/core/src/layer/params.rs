use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::{seed, Matrix};

/// Widths of a layer: model width `d`, `heads × head_dim` attention
/// width and feed-forward width `ff_dim`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub d: usize,
    pub heads: usize,
    pub head_dim: usize,
    pub ff_dim: usize,
}

impl LayerShape {
    pub fn new(d: usize, heads: usize, head_dim: usize, ff_dim: usize) -> Result<Self> {
        if d == 0 || heads == 0 || head_dim == 0 {
            return Err(invalid("model width, head count and head size must be positive"));
        }
        Ok(LayerShape {
            d,
            heads,
            head_dim,
            ff_dim,
        })
    }

    pub fn attention_width(&self) -> usize {
        self.heads * self.head_dim
    }

    /// Number of scalar parameters.
    pub fn param_count(&self) -> usize {
        3 * self.heads * self.d * self.head_dim
            + self.attention_width() * self.d
            + 2 * self.d * self.ff_dim
    }
}

/// Query, key and value projections of one head, each `d × m`.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadParams {
    pub w_q: Matrix,
    pub w_k: Matrix,
    pub w_v: Matrix,
}

/// All weights of a layer. Biases are omitted.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams {
    pub heads: Vec<HeadParams>,
    /// `(h·m) × d` output projection.
    pub w_o: Matrix,
    /// `d × r_ff` feed-forward expansion.
    pub w_1: Matrix,
    /// `r_ff × d` feed-forward contraction.
    pub w_2: Matrix,
}

impl LayerParams {
    pub fn zeros(shape: LayerShape) -> Self {
        let LayerShape {
            d,
            heads,
            head_dim,
            ff_dim,
        } = shape;
        LayerParams {
            heads: (0..heads)
                .map(|_| HeadParams {
                    w_q: Matrix::zeros(d, head_dim),
                    w_k: Matrix::zeros(d, head_dim),
                    w_v: Matrix::zeros(d, head_dim),
                })
                .collect(),
            w_o: Matrix::zeros(heads * head_dim, d),
            w_1: Matrix::zeros(d, ff_dim),
            w_2: Matrix::zeros(ff_dim, d),
        }
    }

    /// Gaussian entries with standard deviation `1/√fan_in`.
    pub fn random(shape: LayerShape, seed: u64) -> Self {
        let mut params = LayerParams::zeros(shape);
        let mut rng = seed::rng(seed);
        for (_, m) in params.tensors_mut() {
            let std = 1.0 / (m.nrows().max(1) as f64).sqrt();
            let normal = Normal::new(0.0, std).expect("positive std");
            // Row-major fill so the stream order matches the flat layout.
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    m[(i, j)] = normal.sample(&mut rng);
                }
            }
        }
        params
    }

    /// Infer and check the shape.
    pub fn shape(&self) -> Result<LayerShape> {
        let first = self
            .heads
            .first()
            .ok_or_else(|| invalid("a layer needs at least one head"))?;
        let (d, m) = first.w_q.shape();
        let shape = LayerShape::new(d, self.heads.len(), m, self.w_1.ncols())?;
        let bad = |what: &str, got: (usize, usize), want: (usize, usize)| {
            Error::ShapeMismatch(format!("{what} is {}×{}, expected {}×{}", got.0, got.1, want.0, want.1))
        };
        for (h, head) in self.heads.iter().enumerate() {
            for (name, w) in [("w_q", &head.w_q), ("w_k", &head.w_k), ("w_v", &head.w_v)] {
                if w.shape() != (d, m) {
                    return Err(bad(&format!("head {h} {name}"), w.shape(), (d, m)));
                }
            }
        }
        if self.w_o.shape() != (shape.attention_width(), d) {
            return Err(bad("w_o", self.w_o.shape(), (shape.attention_width(), d)));
        }
        if self.w_1.nrows() != d {
            return Err(bad("w_1", self.w_1.shape(), (d, shape.ff_dim)));
        }
        if self.w_2.shape() != (shape.ff_dim, d) {
            return Err(bad("w_2", self.w_2.shape(), (shape.ff_dim, d)));
        }
        let all_finite = self.tensors().iter().all(|(_, m)| m.iter().all(|x| x.is_finite()));
        if !all_finite {
            return Err(invalid("layer parameters contain non-finite entries"));
        }
        Ok(shape)
    }

    /// Tensors in canonical order: per head `w_q, w_k, w_v`, then `w_o`,
    /// `w_1`, `w_2`.
    pub fn tensors(&self) -> Vec<(String, &Matrix)> {
        let mut out = Vec::with_capacity(3 * self.heads.len() + 3);
        for (h, head) in self.heads.iter().enumerate() {
            out.push((format!("head{h}.w_q"), &head.w_q));
            out.push((format!("head{h}.w_k"), &head.w_k));
            out.push((format!("head{h}.w_v"), &head.w_v));
        }
        out.push(("w_o".into(), &self.w_o));
        out.push(("w_1".into(), &self.w_1));
        out.push(("w_2".into(), &self.w_2));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Matrix)> {
        let mut out = Vec::with_capacity(3 * self.heads.len() + 3);
        for (h, head) in self.heads.iter_mut().enumerate() {
            out.push((format!("head{h}.w_q"), &mut head.w_q));
            out.push((format!("head{h}.w_k"), &mut head.w_k));
            out.push((format!("head{h}.w_v"), &mut head.w_v));
        }
        out.push(("w_o".into(), &mut self.w_o));
        out.push(("w_1".into(), &mut self.w_1));
        out.push(("w_2".into(), &mut self.w_2));
        out
    }

    /// Row-major concatenation of [`tensors`](Self::tensors).
    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat = Vec::new();
        for (_, m) in self.tensors() {
            flat.extend(m.transpose().iter());
        }
        flat
    }

    pub fn from_flat(shape: LayerShape, flat: &[f64]) -> Result<Self> {
        if flat.len() != shape.param_count() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} parameters",
                flat.len(),
                shape.param_count()
            )));
        }
        let mut params = LayerParams::zeros(shape);
        let mut offset = 0;
        for (_, m) in params.tensors_mut() {
            let len = m.len();
            *m = Matrix::from_row_slice(m.nrows(), m.ncols(), &flat[offset..offset + len]);
            offset += len;
        }
        Ok(params)
    }
}

/// JSON manifest that accompanies a parameter blob.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub h: usize,
    pub m: usize,
    pub d: usize,
    pub r_ff: usize,
    pub seed: Option<u64>,
    /// Blob file name, relative to the manifest.
    pub blob: String,
}

/// Write `<stem>.bin` (little-endian `f64`, canonical flat order) and
/// `<stem>.json`. Returns the manifest path.
pub fn save_checkpoint(params: &LayerParams, stem: impl AsRef<Path>, seed: Option<u64>) -> Result<PathBuf> {
    let shape = params.shape()?;
    let stem = stem.as_ref();
    let blob = stem.with_extension("bin");
    let manifest_path = stem.with_extension("json");
    let file = File::create(&blob).map_err(|e| Error::io(&blob, e))?;
    let mut out = BufWriter::new(file);
    for x in params.to_flat() {
        out.write_all(&x.to_le_bytes()).map_err(|e| Error::io(&blob, e))?;
    }
    out.flush().map_err(|e| Error::io(&blob, e))?;
    let manifest = CheckpointManifest {
        h: shape.heads,
        m: shape.head_dim,
        d: shape.d,
        r_ff: shape.ff_dim,
        seed,
        blob: blob
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
    };
    crate::io::write_json(&manifest, &manifest_path)?;
    Ok(manifest_path)
}

pub fn load_checkpoint(manifest_path: impl AsRef<Path>) -> Result<(LayerParams, CheckpointManifest)> {
    let manifest_path = manifest_path.as_ref();
    let file = File::open(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let manifest: CheckpointManifest = serde_json::from_reader(BufReader::new(file))?;
    let shape = LayerShape::new(manifest.d, manifest.h, manifest.m, manifest.r_ff)?;
    let blob = manifest_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(&manifest.blob);
    let mut bytes = Vec::new();
    File::open(&blob)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(&blob, e))?;
    if bytes.len() != 8 * shape.param_count() {
        return Err(Error::Format(format!(
            "{} holds {} bytes, expected {}",
            blob.display(),
            bytes.len(),
            8 * shape.param_count()
        )));
    }
    let flat: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let params = LayerParams::from_flat(shape, &flat)?;
    params.shape()?;
    Ok((params, manifest))
}

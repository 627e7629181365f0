//! Graph files.
//!
//! Text form: one line of JSON `{"n": .., "nnz": .., "meta": {..}}`
//! followed by one `row col label` line per edge, rows ascending.
//!
//! Binary form: the magic `DIFG`, then little-endian `u64` values `n`,
//! `nnz`, `n + 1` row offsets and `nnz` column indices, then one `u8` label
//! code per edge (`0` self, `1` local, `2` global, `3` random).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AttentionGraph, EdgeLabel, GraphMeta};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"DIFG";

#[derive(Serialize, Deserialize)]
struct Header {
    n: usize,
    nnz: usize,
    #[serde(default)]
    meta: GraphMeta,
}

pub fn write_graph_text<W: Write>(g: &AttentionGraph, mut out: W) -> std::io::Result<()> {
    let header = Header {
        n: g.n(),
        nnz: g.nnz(),
        meta: g.meta().clone(),
    };
    serde_json::to_writer(&mut out, &header)?;
    writeln!(out)?;
    for (i, j, l) in g.edges() {
        writeln!(out, "{i} {j} {l}")?;
    }
    out.flush()
}

pub fn read_graph_text<R: BufRead>(input: R) -> Result<AttentionGraph> {
    let mut lines = input.lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::Format("empty graph file".into()))?
        .map_err(|e| Error::Format(e.to_string()))?;
    let header: Header = serde_json::from_str(&first)?;
    let mut rows: Vec<Vec<(usize, EdgeLabel)>> = vec![Vec::new(); header.n];
    let mut count = 0;
    let mut last_row = 0;
    for (lineno, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::Format(e.to_string()))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = || Error::Format(format!("line {}: expected `row col label`", lineno + 2));
        let mut parts = line.split_whitespace();
        let i: usize = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let j: usize = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let l: EdgeLabel = parts.next().ok_or_else(bad)?.parse()?;
        if parts.next().is_some() || i >= header.n || j >= header.n {
            return Err(bad());
        }
        if i < last_row {
            return Err(Error::Format(format!("line {}: rows must ascend", lineno + 2)));
        }
        last_row = i;
        rows[i].push((j, l));
        count += 1;
    }
    let g = AttentionGraph::from_rows(header.n, rows, header.meta)?;
    if count != header.nnz || g.nnz() != header.nnz {
        return Err(Error::Format(format!(
            "header declares {} edges, file holds {count} ({} distinct)",
            header.nnz,
            g.nnz()
        )));
    }
    Ok(g)
}

pub fn write_graph_binary<W: Write>(g: &AttentionGraph, mut out: W) -> std::io::Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&(g.n() as u64).to_le_bytes())?;
    out.write_all(&(g.nnz() as u64).to_le_bytes())?;
    for &o in g.row_offsets() {
        out.write_all(&(o as u64).to_le_bytes())?;
    }
    for &c in g.col_indices() {
        out.write_all(&(c as u64).to_le_bytes())?;
    }
    let labels: Vec<u8> = g.edge_labels().iter().map(|l| l.code()).collect();
    out.write_all(&labels)?;
    out.flush()
}

pub fn read_graph_binary<R: Read>(mut input: R) -> Result<AttentionGraph> {
    let fmt = |e: std::io::Error| Error::Format(format!("truncated binary graph: {e}"));
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic).map_err(fmt)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a binary graph file".into()));
    }
    let mut word = [0u8; 8];
    let mut read_u64 = |input: &mut R| -> Result<usize> {
        input.read_exact(&mut word).map_err(fmt)?;
        usize::try_from(u64::from_le_bytes(word))
            .map_err(|_| Error::Format("value does not fit in usize".into()))
    };
    let n = read_u64(&mut input)?;
    let nnz = read_u64(&mut input)?;
    let offsets = (0..=n).map(|_| read_u64(&mut input)).collect::<Result<Vec<_>>>()?;
    let cols = (0..nnz).map(|_| read_u64(&mut input)).collect::<Result<Vec<_>>>()?;
    let mut codes = vec![0u8; nnz];
    input.read_exact(&mut codes).map_err(fmt)?;
    let labels = codes
        .into_iter()
        .map(|c| EdgeLabel::from_code(c).ok_or_else(|| Error::Format(format!("bad label code {c}"))))
        .collect::<Result<Vec<_>>>()?;
    AttentionGraph::from_csr(n, offsets, cols, labels, GraphMeta::default())
}

fn is_binary_path(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "bin")
}

/// Write to `path`, binary when the extension is `.bin`, text otherwise.
pub fn write_graph(g: &AttentionGraph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let out = BufWriter::new(file);
    if is_binary_path(path) {
        write_graph_binary(g, out)
    } else {
        write_graph_text(g, out)
    }
    .map_err(|e| Error::io(path, e))
}

pub fn read_graph(path: impl AsRef<Path>) -> Result<AttentionGraph> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    if is_binary_path(path) {
        read_graph_binary(BufReader::new(file))
    } else {
        read_graph_text(BufReader::new(file))
    }
}

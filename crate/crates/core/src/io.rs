//! Matrix CSV files.
//!
//! The first line holds the dimensions `n,d`; each following line is one
//! row of `d` comma-separated values. Values are written in shortest
//! round-trip form, so a write/read cycle is exact.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::Matrix;

pub fn write_matrix_csv<W: Write>(m: &Matrix, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{},{}", m.nrows(), m.ncols())?;
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|x| x.to_string()).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    out.flush()
}

pub fn read_matrix_csv<R: BufRead>(input: R) -> Result<Matrix> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty matrix file".into()))?
        .map_err(|e| Error::Format(e.to_string()))?;
    let dims: Vec<usize> = header
        .trim()
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Format(format!("bad matrix header {header:?}, expected `n,d`")))?;
    let [n, d] = dims[..] else {
        return Err(Error::Format(format!("bad matrix header {header:?}, expected `n,d`")));
    };
    let mut data = Vec::with_capacity(n * d);
    let mut rows = 0;
    for (k, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::Format(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let before = data.len();
        for field in line.split(',') {
            let x: f64 = field.trim().parse().map_err(|_| {
                Error::Format(format!("line {}: cannot parse {field:?}", k + 2))
            })?;
            if !x.is_finite() {
                return Err(Error::Format(format!("line {}: non-finite value", k + 2)));
            }
            data.push(x);
        }
        if data.len() - before != d {
            return Err(Error::Format(format!("line {}: expected {d} values", k + 2)));
        }
        rows += 1;
    }
    if rows != n {
        return Err(Error::Format(format!("header declares {n} rows, found {rows}")));
    }
    Ok(Matrix::from_row_slice(n, d, &data))
}

pub fn write_matrix(m: &Matrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_matrix_csv(m, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_matrix_csv(BufReader::new(file))
}

/// Write any serializable value as pretty JSON.
pub fn write_json<T: serde::Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let m = Matrix::from_fn(3, 2, |i, j| (i as f64 + 0.1) / (j as f64 + 3.0) - 1e-300);
        let mut buf = Vec::new();
        write_matrix_csv(&m, &mut buf).unwrap();
        assert!(buf.starts_with(b"3,2\n"));
        assert_eq!(read_matrix_csv(&buf[..]).unwrap(), m);
    }

    #[test]
    fn rejects_ragged_rows() {
        assert!(read_matrix_csv("2,2\n1,2\n3\n".as_bytes()).is_err());
        assert!(read_matrix_csv("2,2\n1,2\n".as_bytes()).is_err());
        assert!(read_matrix_csv("x,2\n".as_bytes()).is_err());
        assert!(read_matrix_csv("1,1\nNaN\n".as_bytes()).is_err());
    }
}

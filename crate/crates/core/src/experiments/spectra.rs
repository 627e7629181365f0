use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{graph_bytes, ExperimentReport, PatternSpec, TrialRecord};
use crate::error::{invalid, Error, Result};
use crate::graph::{pattern_stats, PatternStats};
use crate::spectral::{pattern_spectrum, Operator, Spectrum};

/// Largest `n` for [`pattern_spectra_compare`].
pub const SPECTRA_COMPARE_LIMIT: usize = 2048;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedPattern {
    pub name: String,
    #[serde(flatten)]
    pub spec: PatternSpec,
}

impl NamedPattern {
    pub fn new(name: &str, spec: PatternSpec) -> Self {
        NamedPattern {
            name: name.to_string(),
            spec,
        }
    }
}

/// Normalized-Laplacian spectra of every pattern under every seed.
pub struct SpectraComparison {
    pub report: ExperimentReport,
    /// `(pattern name, seed, spectrum)` in pattern-major, seed-minor order.
    pub spectra: Vec<(String, u64, Spectrum)>,
}

impl SpectraComparison {
    /// `spectrum_<name>_seed<seed>.csv` per curve plus `summary.csv`.
    pub fn write_csvs(&self, dir: &Path) -> Result<()> {
        for (name, seed, s) in &self.spectra {
            let path = dir.join(format!("spectrum_{name}_seed{seed}.csv"));
            let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
            s.write_csv(BufWriter::new(file)).map_err(|e| Error::io(&path, e))?;
        }
        let path = dir.join("summary.csv");
        let mut out = BufWriter::new(File::create(&path).map_err(|e| Error::io(&path, e))?);
        let mut write = || -> std::io::Result<()> {
            writeln!(out, "pattern,seed,lambda_1,lambda_2,lambda_n_minus_1,lambda_n")?;
            for (name, seed, s) in &self.spectra {
                let n = s.len();
                writeln!(
                    out,
                    "{name},{seed},{:?},{:?},{:?},{:?}",
                    s.lambda(1),
                    s.lambda(2.min(n)),
                    s.lambda(n.saturating_sub(1).max(1)),
                    s.lambda(n)
                )?;
            }
            out.flush()
        };
        write().map_err(|e| Error::io(&path, e))
    }
}

/// Spectra of several patterns on `n` tokens, symmetrized without self
/// loops. Trial metrics are `<name>.lambda_1`, `<name>.lambda_2`,
/// `<name>.lambda_n_minus_1` and `<name>.lambda_n`.
pub fn pattern_spectra_compare(
    n: usize,
    patterns: &[NamedPattern],
    seeds: &[u64],
) -> Result<SpectraComparison> {
    if n < 2 || n > SPECTRA_COMPARE_LIMIT {
        return Err(invalid(format!(
            "spectra comparison needs 2 ≤ n ≤ {SPECTRA_COMPARE_LIMIT}, got {n}"
        )));
    }
    if let Some(bad) = patterns
        .iter()
        .find(|p| p.name.is_empty() || !p.name.chars().all(|c| c.is_ascii_alphanumeric() || "-_".contains(c)))
    {
        return Err(invalid(format!("pattern name {:?} must be non-empty [A-Za-z0-9_-]", bad.name)));
    }
    let start = Instant::now();
    let jobs: Vec<(usize, u64)> = (0..patterns.len())
        .flat_map(|p| seeds.iter().map(move |&s| (p, s)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(p, s)| -> Result<(Spectrum, usize)> {
            let g = patterns[p].spec.build(n, s)?;
            Ok((pattern_spectrum(&g, Operator::NormalizedLaplacian)?, g.nnz()))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut trials: BTreeMap<u64, BTreeMap<String, f64>> = BTreeMap::new();
    let mut spectra = Vec::with_capacity(jobs.len());
    let mut max_nnz = 0;
    for (&(p, s), (spectrum, nnz)) in jobs.iter().zip(results) {
        let name = &patterns[p].name;
        let metrics = trials.entry(s).or_default();
        metrics.insert(format!("{name}.lambda_1"), spectrum.lambda(1));
        metrics.insert(format!("{name}.lambda_2"), spectrum.lambda(2));
        metrics.insert(format!("{name}.lambda_n_minus_1"), spectrum.lambda(n - 1));
        metrics.insert(format!("{name}.lambda_n"), spectrum.lambda(n));
        spectra.push((name.clone(), s, spectrum));
        max_nnz = max_nnz.max(nnz);
    }
    // Dense eigensolver workspace dominates: one n × n matrix.
    let peak = graph_bytes(n, max_nnz) + (n * n * 8) as u64;
    let order: Vec<u64> = seeds.to_vec();
    let trials = order
        .iter()
        .filter_map(|s| trials.remove(s).map(|metrics| TrialRecord { seed: *s, metrics }))
        .collect();
    let parameters = json!({ "n": n, "patterns": patterns, "seeds": seeds });
    let report = ExperimentReport::new(
        "compare_spectra",
        parameters,
        trials,
        start.elapsed().as_secs_f64(),
        peak,
    );
    Ok(SpectraComparison { report, spectra })
}

/// Sparsity of one pattern over several sequence lengths.
pub fn sparsity_table(spec: &PatternSpec, ns: &[usize], seed: u64) -> Result<Vec<PatternStats>> {
    ns.iter()
        .map(|&n| Ok(pattern_stats(&spec.build(n, seed)?)))
        .collect()
}

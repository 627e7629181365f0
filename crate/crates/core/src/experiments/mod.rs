//! Seeded desk-scale experiments.
//!
//! Each experiment is a pure function of its configuration and seeds,
//! apart from timings. [`run_experiment`] drives one from an
//! [`ExperimentConfig`] and writes `report.json` plus CSV files into a run
//! directory.

mod bench;
mod pattern;
mod report;
mod roll;
mod spectra;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diffusion::DiffusionConfig;
use crate::error::{invalid, Error, Result};
use crate::io::write_json;
use crate::layer::LayerShape;

pub use bench::{bench, WEIGHT_BYTES};
pub use pattern::{PatternSpec, Selection};
pub use report::{aggregate, Aggregate, ExperimentReport, TrialRecord};
pub use roll::{random_input, roll, roll_deviation, roll_robustness, ROLL_CONTROL_TOLERANCE};
pub use spectra::{
    pattern_spectra_compare, sparsity_table, NamedPattern, SpectraComparison,
    SPECTRA_COMPARE_LIMIT,
};

/// Bytes of a CSR graph: offsets and column indices as `u64`, one label
/// byte per edge.
pub fn graph_bytes(n: usize, nnz: usize) -> u64 {
    ((n + 1) * 8 + nnz * 9) as u64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    RollRobustness,
    CompareSpectra,
    Sparsity,
    Bench,
}

/// Layer dimensions in config files.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerConfig {
    pub d: usize,
    pub h: usize,
    pub m: usize,
    pub r_ff: usize,
}

impl Default for LayerConfig {
    fn default() -> Self {
        LayerConfig {
            d: 16,
            h: 2,
            m: 8,
            r_ff: 32,
        }
    }
}

impl LayerConfig {
    pub fn shape(&self) -> Result<LayerShape> {
        LayerShape::new(self.d, self.h, self.m, self.r_ff)
    }
}

fn default_alpha() -> f64 {
    0.1
}

fn default_steps() -> usize {
    5
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_reps() -> usize {
    5
}

fn default_value_dim() -> usize {
    64
}

/// Experiment configuration file.
///
/// ```
/// use diffuser::experiments::{ExperimentConfig, ExperimentKind};
/// let cfg: ExperimentConfig = serde_json::from_str(r#"{
///     "experiment": "roll_robustness",
///     "n": 64,
///     "pattern": {"window": 8},
///     "seeds": [0, 1],
///     "shifts": [1, 7]
/// }"#).unwrap();
/// assert_eq!(cfg.experiment, ExperimentKind::RollRobustness);
/// assert_eq!(cfg.alpha, 0.1);
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub n: usize,
    #[serde(default)]
    pub pattern: PatternSpec,
    /// Patterns for `compare_spectra`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub patterns: Vec<NamedPattern>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub shifts: Vec<usize>,
    #[serde(default)]
    pub layer: LayerConfig,
    /// Sequence lengths for `sparsity`; defaults to `[n]`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ns: Vec<usize>,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default = "default_value_dim")]
    pub value_dim: usize,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind, n: usize) -> Self {
        ExperimentConfig {
            experiment,
            n,
            pattern: PatternSpec::default(),
            patterns: Vec::new(),
            alpha: default_alpha(),
            steps: default_steps(),
            seeds: default_seeds(),
            shifts: Vec::new(),
            layer: LayerConfig::default(),
            ns: Vec::new(),
            reps: default_reps(),
            value_dim: default_value_dim(),
        }
    }

    pub fn diffusion(&self) -> Result<DiffusionConfig> {
        DiffusionConfig::new(self.alpha, self.steps)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn write_csv_file(
    path: &Path,
    write: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write(&mut out)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

/// Run the configured experiment and write `report.json`, `trials.csv` and
/// any experiment-specific CSV files into `out_dir` (created if missing).
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentReport> {
    if config.seeds.is_empty() {
        return Err(invalid("at least one seed is required"));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let report = match config.experiment {
        ExperimentKind::RollRobustness => {
            if config.shifts.is_empty() {
                return Err(invalid("roll_robustness needs at least one shift"));
            }
            roll_robustness(
                config.n,
                config.layer.shape()?,
                &config.pattern,
                &config.diffusion()?,
                &config.shifts,
                &config.seeds,
            )?
        }
        ExperimentKind::CompareSpectra => {
            if config.patterns.is_empty() {
                return Err(invalid("compare_spectra needs a non-empty pattern list"));
            }
            let c = pattern_spectra_compare(config.n, &config.patterns, &config.seeds)?;
            c.write_csvs(out_dir)?;
            c.report
        }
        ExperimentKind::Sparsity => sparsity_report(config, out_dir)?,
        ExperimentKind::Bench => bench(
            config.n,
            &config.pattern,
            config.value_dim,
            &config.diffusion()?,
            config.reps,
            &config.seeds,
        )?,
    };
    write_json(&report, out_dir.join("report.json"))?;
    write_csv_file(&out_dir.join("trials.csv"), |out| report.write_trials_csv(out))?;
    Ok(report)
}

fn sparsity_report(config: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentReport> {
    let start = std::time::Instant::now();
    let ns = if config.ns.is_empty() { vec![config.n] } else { config.ns.clone() };
    let mut trials = Vec::new();
    let mut rows = Vec::new();
    let mut max_bytes = 0;
    for &seed in &config.seeds {
        let stats = sparsity_table(&config.pattern, &ns, seed)?;
        let mut metrics = std::collections::BTreeMap::new();
        for s in &stats {
            metrics.insert(format!("n{}.pct_total", s.n), s.pct_total);
            metrics.insert(format!("n{}.nnz", s.n), s.nnz_total as f64);
            max_bytes = max_bytes.max(graph_bytes(s.n, s.nnz_total));
        }
        rows.extend(stats.into_iter().map(|s| (seed, s)));
        trials.push(TrialRecord { seed, metrics });
    }
    write_csv_file(&out_dir.join("sparsity.csv"), |out| {
        writeln!(out, "seed,n,nnz,pct_total,pct_self,pct_local,pct_global,pct_random")?;
        for (seed, s) in &rows {
            let p = &s.pct_by_label;
            writeln!(
                out,
                "{seed},{},{},{:?},{:?},{:?},{:?},{:?}",
                s.n, s.nnz_total, s.pct_total, p.self_loops, p.local, p.global, p.random
            )?;
        }
        Ok(())
    })?;
    let parameters = serde_json::json!({ "pattern": config.pattern, "ns": ns, "seeds": config.seeds });
    Ok(ExperimentReport::new(
        "sparsity",
        parameters,
        trials,
        start.elapsed().as_secs_f64(),
        max_bytes,
    ))
}

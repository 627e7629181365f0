use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

/// Metrics of one seeded trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub parameters: serde_json::Value,
    pub trials: Vec<TrialRecord>,
    pub aggregate: BTreeMap<String, Aggregate>,
    pub wall_time_secs: f64,
    /// Working set estimated from edge counts, not measured.
    pub peak_bytes_estimate: u64,
}

impl ExperimentReport {
    pub fn new(
        experiment: &str,
        parameters: serde_json::Value,
        trials: Vec<TrialRecord>,
        wall_time_secs: f64,
        peak_bytes_estimate: u64,
    ) -> Self {
        let aggregate = aggregate(&trials);
        ExperimentReport {
            experiment: experiment.to_string(),
            parameters,
            trials,
            aggregate,
            wall_time_secs,
            peak_bytes_estimate,
        }
    }

    /// Metric values across trials, in trial order.
    pub fn metric(&self, name: &str) -> Vec<f64> {
        self.trials.iter().filter_map(|t| t.metrics.get(name).copied()).collect()
    }

    /// One row per trial: `seed` then every metric name in sorted order.
    /// Missing metrics are left empty.
    pub fn write_trials_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let names: Vec<&String> = self.aggregate.keys().collect();
        write!(out, "seed")?;
        for name in &names {
            write!(out, ",{name}")?;
        }
        writeln!(out)?;
        for t in &self.trials {
            write!(out, "{}", t.seed)?;
            for name in &names {
                match t.metrics.get(*name) {
                    Some(v) => write!(out, ",{v:?}")?,
                    None => write!(out, ",")?,
                }
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Mean, min and max of every metric over the trials that report it.
pub fn aggregate(trials: &[TrialRecord]) -> BTreeMap<String, Aggregate> {
    let mut values: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for t in trials {
        for (k, v) in &t.metrics {
            values.entry(k.clone()).or_default().push(*v);
        }
    }
    values
        .into_iter()
        .map(|(k, vs)| {
            let agg = Aggregate {
                mean: vs.iter().sum::<f64>() / vs.len() as f64,
                min: vs.iter().copied().fold(f64::INFINITY, f64::min),
                max: vs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            };
            (k, agg)
        })
        .collect()
}

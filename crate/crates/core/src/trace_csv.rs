//! CSV trace files.
//!
//! Per-repetition rows use the header
//! `experiment,algorithm,rep,t,regret,switches,weighted_cost,regret_with_cost`;
//! aggregate files carry a mean and a sample standard deviation per metric.
//! Reals are written with 6 significant digits, LF line endings, rows sorted
//! by (algorithm, rep, t).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::harness::{AggregatePoint, AggregateTrace, ExperimentOutput, MeanStd};

pub const RUN_HEADER: &str =
    "experiment,algorithm,rep,t,regret,switches,weighted_cost,regret_with_cost";

pub const AGGREGATE_HEADER: &str = "experiment,algorithm,reps,t,regret_mean,regret_std,switches_mean,switches_std,weighted_cost_mean,weighted_cost_std,regret_with_cost_mean,regret_with_cost_std";

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed trace CSV: {0}")]
    Malformed(String),
}

/// Rounds to 6 significant digits.
pub fn quantize(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.5e}")
        .parse()
        .expect("scientific notation parses")
}

fn number(x: f64) -> String {
    let q = quantize(x);
    if q == 0.0 {
        "0".to_string()
    } else {
        q.to_string()
    }
}

/// Per-repetition CSV text.
pub fn runs_csv(output: &ExperimentOutput) -> String {
    let mut runs: Vec<_> = output.runs.iter().collect();
    runs.sort_by(|a, b| (&a.algorithm, a.repetition).cmp(&(&b.algorithm, b.repetition)));
    let mut text = String::from(RUN_HEADER);
    text.push('\n');
    for run in runs {
        for c in &run.checkpoints {
            writeln!(
                text,
                "{},{},{},{},{},{},{},{}",
                output.name,
                run.algorithm,
                run.repetition,
                c.t,
                number(c.regret),
                c.switches,
                number(c.weighted_cost),
                number(c.regret_with_cost),
            )
            .unwrap();
        }
    }
    text
}

/// Aggregate CSV text for traces of one experiment.
pub fn aggregate_csv(experiment: &str, aggregates: &[AggregateTrace]) -> String {
    let mut sorted: Vec<_> = aggregates.iter().collect();
    sorted.sort_by(|a, b| a.algorithm.cmp(&b.algorithm));
    let mut text = String::from(AGGREGATE_HEADER);
    text.push('\n');
    for agg in sorted {
        for p in &agg.points {
            write!(
                text,
                "{},{},{},{}",
                experiment, agg.algorithm, agg.reps, p.t
            )
            .unwrap();
            for m in [p.regret, p.switches, p.weighted_cost, p.regret_with_cost] {
                write!(text, ",{},{}", number(m.mean), number(m.std)).unwrap();
            }
            text.push('\n');
        }
    }
    text
}

#[derive(Debug, Deserialize)]
struct AggregateRow {
    experiment: String,
    algorithm: String,
    reps: usize,
    t: u64,
    regret_mean: f64,
    regret_std: f64,
    switches_mean: f64,
    switches_std: f64,
    weighted_cost_mean: f64,
    weighted_cost_std: f64,
    regret_with_cost_mean: f64,
    regret_with_cost_std: f64,
}

/// An aggregate file read back: experiment name and traces in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateFile {
    pub experiment: String,
    pub traces: Vec<AggregateTrace>,
}

pub fn parse_aggregate_csv(text: &str) -> Result<AggregateFile, CsvError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| CsvError::Malformed(e.to_string()))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != AGGREGATE_HEADER {
        return Err(CsvError::Malformed(format!("unexpected header `{header}`")));
    }
    let mut experiment: Option<String> = None;
    let mut order: Vec<String> = Vec::new();
    let mut traces: BTreeMap<String, AggregateTrace> = BTreeMap::new();
    for (line, row) in reader.deserialize::<AggregateRow>().enumerate() {
        let row = row.map_err(|e| CsvError::Malformed(format!("row {}: {e}", line + 2)))?;
        match &experiment {
            None => experiment = Some(row.experiment.clone()),
            Some(name) if *name != row.experiment => {
                return Err(CsvError::Malformed(format!(
                    "row {}: mixes experiments `{name}` and `{}`",
                    line + 2,
                    row.experiment
                )))
            }
            Some(_) => {}
        }
        let trace = traces.entry(row.algorithm.clone()).or_insert_with(|| {
            order.push(row.algorithm.clone());
            AggregateTrace {
                algorithm: row.algorithm.clone(),
                reps: row.reps,
                points: Vec::new(),
            }
        });
        if let Some(prev) = trace.points.last() {
            if row.t <= prev.t {
                return Err(CsvError::Malformed(format!(
                    "row {}: t must increase within an algorithm",
                    line + 2
                )));
            }
        }
        trace.points.push(AggregatePoint {
            t: row.t,
            regret: MeanStd {
                mean: row.regret_mean,
                std: row.regret_std,
            },
            switches: MeanStd {
                mean: row.switches_mean,
                std: row.switches_std,
            },
            weighted_cost: MeanStd {
                mean: row.weighted_cost_mean,
                std: row.weighted_cost_std,
            },
            regret_with_cost: MeanStd {
                mean: row.regret_with_cost_mean,
                std: row.regret_with_cost_std,
            },
        });
    }
    let experiment = experiment.ok_or_else(|| CsvError::Malformed("no data rows".into()))?;
    let traces = order
        .into_iter()
        .map(|name| traces.remove(&name).expect("inserted above"))
        .collect();
    Ok(AggregateFile { experiment, traces })
}

pub fn read_aggregate_csv(path: &Path) -> Result<AggregateFile, CsvError> {
    let text = std::fs::read_to_string(path).map_err(|source| CsvError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_aggregate_csv(&text)
}

/// The trace as it reads back after being written.
pub fn quantize_aggregate(trace: &AggregateTrace) -> AggregateTrace {
    let q = |m: MeanStd| MeanStd {
        mean: quantize(m.mean),
        std: quantize(m.std),
    };
    AggregateTrace {
        algorithm: trace.algorithm.clone(),
        reps: trace.reps,
        points: trace
            .points
            .iter()
            .map(|p| AggregatePoint {
                t: p.t,
                regret: q(p.regret),
                switches: q(p.switches),
                weighted_cost: q(p.weighted_cost),
                regret_with_cost: q(p.regret_with_cost),
            })
            .collect(),
    }
}

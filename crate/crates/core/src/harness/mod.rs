//! Experiment orchestration: configuration, multi-seed runs, sweeps and
//! result files.

mod config;
mod node;
mod report;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{DataSource, ExperimentConfig, Task};
pub use node::{train_node_model, train_node_seed, NodeTask};
pub use report::{
    emit_results, emit_sweep, read_results_csv, HISTOGRAM_FILE, QUADRANTS_FILE, RESULTS_FILE, SUMMARY_FILE, SWEEP_FILE,
};

use crate::dataset::Dataset;
use crate::drop::QuadrantCounts;
use crate::error::{Error, Result};
use crate::linkpred::{self, LinkTask};

/// Outcome of one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedResult {
    pub seed: u64,
    /// Named scalar metrics in a fixed order.
    pub metrics: Vec<(String, f64)>,
    /// Per-epoch quadrant counts (empty when not tracked).
    pub quadrants: Vec<QuadrantCounts>,
    /// Mean dropping probability per node (or per training edge) across
    /// epochs; empty when nothing was dropped.
    pub drop_prob_mean: Vec<f64>,
    pub wall_seconds: f64,
}

impl SeedResult {
    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    /// Everything except wall-clock time, which never repeats exactly.
    pub fn same_outcome(&self, other: &SeedResult) -> bool {
        self.seed == other.seed
            && self.metrics.len() == other.metrics.len()
            && self
                .metrics
                .iter()
                .zip(&other.metrics)
                .all(|(a, b)| a.0 == b.0 && a.1.to_bits() == b.1.to_bits())
            && self.quadrants == other.quadrants
            && self.drop_prob_mean.len() == other.drop_prob_mean.len()
            && self
                .drop_prob_mean
                .iter()
                .zip(&other.drop_prob_mean)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub task: Task,
    pub seeds: Vec<SeedResult>,
}

impl RunResult {
    pub fn same_outcome(&self, other: &RunResult) -> bool {
        self.task == other.task
            && self.seeds.len() == other.seeds.len()
            && self.seeds.iter().zip(&other.seeds).all(|(a, b)| a.same_outcome(b))
    }

    pub fn metric_values(&self, name: &str) -> Vec<f64> {
        self.seeds.iter().filter_map(|s| s.metric(name)).collect()
    }

    pub fn mean(&self, name: &str) -> f64 {
        let v = self.metric_values(name);
        v.iter().sum::<f64>() / v.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub name: String,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

/// Mean ± sample standard deviation per metric.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsTable {
    pub rows: Vec<MetricSummary>,
}

impl MetricsTable {
    pub fn get(&self, name: &str) -> Option<&MetricSummary> {
        self.rows.iter().find(|r| r.name == name)
    }
}

/// Sample mean and standard deviation (n − 1 denominator; 0 for one value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

pub fn aggregate(results: &[SeedResult]) -> Result<MetricsTable> {
    let first = results
        .first()
        .ok_or_else(|| Error::InvalidArgument("no seed results to aggregate".into()))?;
    let rows = first
        .metrics
        .iter()
        .map(|(name, _)| {
            let values: Vec<f64> = results.iter().filter_map(|r| r.metric(name)).collect();
            let (mean, std) = mean_std(&values);
            MetricSummary {
                name: name.clone(),
                mean,
                std,
                count: values.len(),
            }
        })
        .collect();
    Ok(MetricsTable { rows })
}

fn run_seeds<F>(seeds: &[u64], f: F) -> Result<Vec<SeedResult>>
where
    F: Fn(u64) -> Result<SeedResult> + Sync,
{
    seeds.par_iter().map(|&s| f(s)).collect()
}

pub fn node_task(cfg: &ExperimentConfig) -> NodeTask<'_> {
    NodeTask {
        train: &cfg.train,
        drop: &cfg.drop,
        explain: &cfg.explain,
        track_quadrants: cfg.track_quadrants,
    }
}

pub fn link_task(cfg: &ExperimentConfig) -> LinkTask<'_> {
    LinkTask {
        train: &cfg.train,
        drop: &cfg.drop,
        explain: &cfg.explain,
        link: &cfg.link,
        track_quadrants: cfg.track_quadrants,
    }
}

/// Node classification on an already loaded dataset, one run per seed.
pub fn run_node_classification_on(ds: &Dataset, cfg: &ExperimentConfig) -> Result<RunResult> {
    cfg.validate()?;
    let task = node_task(cfg);
    let seeds = run_seeds(&cfg.seeds, |s| train_node_seed(ds, &task, s))?;
    Ok(RunResult {
        task: Task::NodeClassification,
        seeds,
    })
}

pub fn run_node_classification(cfg: &ExperimentConfig) -> Result<RunResult> {
    cfg.validate()?;
    let ds = cfg.data.load()?;
    run_node_classification_on(&ds, cfg)
}

pub fn run_link_prediction_on(ds: &Dataset, cfg: &ExperimentConfig) -> Result<RunResult> {
    cfg.validate()?;
    let task = link_task(cfg);
    let seeds = run_seeds(&cfg.seeds, |s| linkpred::run_xai_drop_edge(ds, &task, s))?;
    Ok(RunResult {
        task: Task::LinkPrediction,
        seeds,
    })
}

pub fn run_link_prediction(cfg: &ExperimentConfig) -> Result<RunResult> {
    cfg.validate()?;
    let ds = cfg.data.load()?;
    run_link_prediction_on(&ds, cfg)
}

pub fn run_on(ds: &Dataset, cfg: &ExperimentConfig) -> Result<RunResult> {
    match cfg.task {
        Task::NodeClassification => run_node_classification_on(ds, cfg),
        Task::LinkPrediction => run_link_prediction_on(ds, cfg),
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<RunResult> {
    cfg.validate()?;
    let ds = cfg.data.load()?;
    run_on(&ds, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Theta,
    P,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theta" => Ok(SweepAxis::Theta),
            "p" => Ok(SweepAxis::P),
            _ => Err(Error::Config(format!("sweep axis must be theta or p, got '{s}'"))),
        }
    }
}

impl std::fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SweepAxis::Theta => "theta",
            SweepAxis::P => "p",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub result: RunResult,
    pub table: MetricsTable,
}

/// Repeats the configured run for every value on `axis`, keeping the seeds fixed.
pub fn run_sweep(cfg: &ExperimentConfig, axis: SweepAxis, values: &[f64]) -> Result<Vec<SweepPoint>> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let ds = cfg.data.load()?;
    values
        .iter()
        .map(|&value| {
            let mut c = cfg.clone();
            match axis {
                SweepAxis::Theta => c.drop.theta = value,
                SweepAxis::P => c.drop.p = value,
            }
            let result = run_on(&ds, &c)?;
            let table = aggregate(&result.seeds)?;
            Ok(SweepPoint { value, result, table })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seed(metrics: &[(&str, f64)]) -> SeedResult {
        SeedResult {
            seed: 0,
            metrics: metrics.iter().map(|(n, v)| (n.to_string(), *v)).collect(),
            quadrants: Vec::new(),
            drop_prob_mean: Vec::new(),
            wall_seconds: 0.0,
        }
    }

    #[test]
    fn aggregate_hand_values() {
        let rs = [seed(&[("a", 1.0)]), seed(&[("a", 2.0)]), seed(&[("a", 3.0)])];
        let t = aggregate(&rs).unwrap();
        assert_eq!(t.get("a").unwrap().mean, 2.0);
        assert_eq!(t.get("a").unwrap().std, 1.0);
        let one = aggregate(&rs[..1]).unwrap();
        assert_eq!(one.get("a").unwrap().std, 0.0);
        let dup = aggregate(&[seed(&[("a", 0.7)]), seed(&[("a", 0.7)])]).unwrap();
        assert_eq!(dup.get("a").unwrap().std, 0.0);
        assert!(aggregate(&[]).is_err());
    }
}

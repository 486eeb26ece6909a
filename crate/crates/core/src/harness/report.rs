use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{aggregate, mean_std, ExperimentConfig, RunResult, SweepAxis, SweepPoint, Task};
use crate::error::{Error, Result};

pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.md";
pub const QUADRANTS_FILE: &str = "quadrants.csv";
pub const HISTOGRAM_FILE: &str = "drop_prob_histogram.csv";
pub const SWEEP_FILE: &str = "sweep.csv";

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// `seed,metric,value` rows. Values use the shortest representation that
/// parses back to the same float. Wall-clock time is left out so repeated
/// runs produce identical files.
pub fn results_csv(result: &RunResult) -> String {
    let mut s = String::from("seed,metric,value\n");
    for r in &result.seeds {
        for (name, v) in &r.metrics {
            let _ = writeln!(s, "{},{},{}", r.seed, name, v);
        }
    }
    s
}

pub fn read_results_csv(path: impl AsRef<Path>) -> Result<Vec<(u64, String, f64)>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let bad = |msg: &str| Error::load(path, i + 1, msg);
        let mut cols = line.split(',');
        let (Some(seed), Some(name), Some(value), None) = (cols.next(), cols.next(), cols.next(), cols.next()) else {
            return Err(bad("expected three columns"));
        };
        let seed = seed.parse().map_err(|_| bad("bad seed"))?;
        let value = value.parse().map_err(|_| bad("bad value"))?;
        out.push((seed, name.to_string(), value));
    }
    Ok(out)
}

fn summary_md(result: &RunResult, cfg: &ExperimentConfig) -> Result<String> {
    let table = aggregate(&result.seeds)?;
    let task = match result.task {
        Task::NodeClassification => "node classification",
        Task::LinkPrediction => "link prediction",
    };
    let method = match cfg.drop.method {
        crate::drop::DropMethod::None => "none".to_string(),
        m => format!(
            "{m:?} dropping, criterion {}, p = {}, theta = {}, mapping {:?}",
            cfg.drop.criterion, cfg.drop.p, cfg.drop.theta, cfg.drop.mapping
        ),
    };
    let seeds: Vec<String> = result.seeds.iter().map(|s| s.seed.to_string()).collect();
    let mut s = String::new();
    let _ = writeln!(s, "# Results\n");
    let _ = writeln!(s, "- task: {task}");
    let _ = writeln!(s, "- data: {}", cfg.data.describe());
    let _ = writeln!(s, "- dropping: {method}");
    let _ = writeln!(s, "- seeds: {}\n", seeds.join(", "));
    let _ = writeln!(s, "| metric | mean ± std | runs |");
    let _ = writeln!(s, "|---|---|---|");
    for row in &table.rows {
        let percent = matches!(
            row.name.as_str(),
            "test_accuracy" | "val_accuracy" | "accuracy_sufficiency" | "test_auc" | "val_auc"
        );
        let scale = if percent { 100.0 } else { 1.0 };
        let _ = writeln!(
            s,
            "| {} | {:.2} ± {:.2} | {} |",
            row.name,
            row.mean * scale,
            row.std * scale,
            row.count
        );
    }
    let times: Vec<f64> = result.seeds.iter().map(|r| r.wall_seconds).collect();
    let (t_mean, t_std) = mean_std(&times);
    let _ = writeln!(s, "\nAccuracy, AUC and accuracy sufficiency are shown in percent.");
    let _ = writeln!(s, "Wall-clock per seed: {t_mean:.2} ± {t_std:.2} s.");
    Ok(s)
}

fn quadrants_csv(result: &RunResult) -> String {
    let mut s = String::from("seed,epoch,hc_ge,hc_pe,lc_ge,lc_pe\n");
    for r in &result.seeds {
        for (e, q) in r.quadrants.iter().enumerate() {
            let _ = writeln!(s, "{},{},{},{},{},{}", r.seed, e, q.hc_ge, q.hc_pe, q.lc_ge, q.lc_pe);
        }
    }
    s
}

fn histogram_csv(result: &RunResult) -> String {
    let element = match result.task {
        Task::NodeClassification => "node",
        Task::LinkPrediction => "edge",
    };
    let mut s = format!("seed,{element},mean_drop_prob\n");
    for r in &result.seeds {
        for (i, p) in r.drop_prob_mean.iter().enumerate() {
            let _ = writeln!(s, "{},{},{}", r.seed, i, p);
        }
    }
    s
}

/// Writes `results.csv`, `summary.md`, `quadrants.csv` and
/// `drop_prob_histogram.csv` into `dir`, creating it if needed.
pub fn emit_results(result: &RunResult, cfg: &ExperimentConfig, dir: impl AsRef<Path>) -> Result<()> {
    if result.seeds.is_empty() {
        return Err(Error::InvalidArgument("no results to write".into()));
    }
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write(&dir.join(RESULTS_FILE), &results_csv(result))?;
    write(&dir.join(SUMMARY_FILE), &summary_md(result, cfg)?)?;
    write(&dir.join(QUADRANTS_FILE), &quadrants_csv(result))?;
    write(&dir.join(HISTOGRAM_FILE), &histogram_csv(result))?;
    Ok(())
}

/// `axis,value,metric,mean,std,runs` rows for every sweep point.
pub fn emit_sweep(points: &[SweepPoint], axis: SweepAxis, dir: impl AsRef<Path>) -> Result<()> {
    if points.is_empty() {
        return Err(Error::InvalidArgument("no sweep points to write".into()));
    }
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut s = String::from("axis,value,metric,mean,std,runs\n");
    for pt in points {
        for row in &pt.table.rows {
            let _ = writeln!(
                s,
                "{axis},{},{},{},{},{}",
                pt.value, row.name, row.mean, row.std, row.count
            );
        }
    }
    write(&dir.join(SWEEP_FILE), &s)
}

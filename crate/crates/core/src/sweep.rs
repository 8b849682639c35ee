//! Repeated design runs over a list of seeds with an aggregate level table.

use std::fs;
use std::path::Path;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::output::{fmt_float, run_design};
use crate::solver::StopReason;

pub const SWEEP_FILE: &str = "sweep_summary.csv";

/// Parses `a..b` (inclusive), a comma list, or a single seed.
pub fn parse_seeds(list: &str) -> Result<Vec<u64>> {
    let bad = || {
        Error::config(
            "seeds",
            format!("expected `a..b`, a comma list or a number, got {list:?}"),
        )
    };
    let list = list.trim();
    let seeds: Vec<u64> = if let Some((a, b)) = list.split_once("..") {
        let b = b.strip_prefix('=').unwrap_or(b);
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        (a..=b).collect()
    } else {
        list.split(',')
            .map(|s| s.trim().parse().map_err(|_| bad()))
            .collect::<Result<_>>()?
    };
    if seeds.is_empty() {
        return Err(Error::config("seeds", "seed list is empty"));
    }
    Ok(seeds)
}

#[derive(Debug, Clone, PartialEq)]
pub enum SeedStatus {
    Finished(StopReason),
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedResult {
    pub seed: u64,
    pub status: SeedStatus,
    pub iterations: usize,
    pub average_db: f64,
    pub minimum_db: f64,
}

impl SeedResult {
    /// Runs that count toward the aggregate: finished without diverging.
    pub fn usable(&self) -> bool {
        matches!(self.status, SeedStatus::Finished(r) if r != StopReason::Diverged)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub runs: Vec<SeedResult>,
    /// Mean of the per-seed average levels.
    pub aggregate_average_db: f64,
    /// Best (lowest) per-seed average level.
    pub aggregate_minimum_db: f64,
}

impl SweepReport {
    pub fn failures(&self) -> usize {
        self.runs.iter().filter(|r| !r.usable()).count()
    }
}

/// Runs one design per seed under `cfg.output_dir/seed_<s>` and writes
/// `sweep_summary.csv` into `cfg.output_dir`. Individual failures are
/// recorded and the sweep continues.
pub fn run_sweep(cfg: &RunConfig, seeds: &[u64]) -> Result<SweepReport> {
    if seeds.is_empty() {
        return Err(Error::config("seeds", "seed list is empty"));
    }
    cfg.validate()?;
    let mut runs = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let mut run_cfg = cfg.clone();
        run_cfg.seed = seed;
        run_cfg.output_dir = cfg.output_dir.join(format!("seed_{seed}"));
        runs.push(match run_design(&run_cfg) {
            Ok(rep) => SeedResult {
                seed,
                status: SeedStatus::Finished(rep.summary.stop_reason),
                iterations: rep.summary.iterations,
                average_db: rep.summary.level.average_db,
                minimum_db: rep.summary.level.minimum_db,
            },
            Err(e) => SeedResult {
                seed,
                status: SeedStatus::Failed(e.to_string()),
                iterations: 0,
                average_db: f64::NAN,
                minimum_db: f64::NAN,
            },
        });
    }
    let usable: Vec<f64> = runs
        .iter()
        .filter(|r| r.usable())
        .map(|r| r.average_db)
        .collect();
    let (aggregate_average_db, aggregate_minimum_db) = if usable.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        (
            usable.iter().sum::<f64>() / usable.len() as f64,
            usable.iter().copied().fold(f64::INFINITY, f64::min),
        )
    };
    let report = SweepReport {
        runs,
        aggregate_average_db,
        aggregate_minimum_db,
    };
    write_sweep(&cfg.output_dir, &report)?;
    Ok(report)
}

fn write_sweep(dir: &Path, report: &SweepReport) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(SWEEP_FILE);
    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file);
    w.write_record(["seed", "status", "iterations", "average_db", "minimum_db"])?;
    for r in &report.runs {
        let status = match &r.status {
            SeedStatus::Finished(s) => s.to_string(),
            SeedStatus::Failed(msg) => format!("error: {msg}"),
        };
        w.write_record([
            r.seed.to_string(),
            status,
            r.iterations.to_string(),
            fmt_float(r.average_db),
            fmt_float(r.minimum_db),
        ])?;
    }
    w.write_record([
        "aggregate".to_string(),
        format!(
            "{} of {} usable",
            report.runs.len() - report.failures(),
            report.runs.len()
        ),
        String::new(),
        fmt_float(report.aggregate_average_db),
        fmt_float(report.aggregate_minimum_db),
    ])?;
    w.flush().map_err(|e| Error::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_specs() {
        assert_eq!(parse_seeds("1..5").unwrap(), vec![1, 2, 3, 4, 5]);
        assert_eq!(parse_seeds("1..=2").unwrap(), vec![1, 2]);
        assert_eq!(parse_seeds("3, 9").unwrap(), vec![3, 9]);
        assert_eq!(parse_seeds("7").unwrap(), vec![7]);
        assert!(parse_seeds("5..1").is_err());
        assert!(parse_seeds("x").is_err());
    }

    #[test]
    fn single_seed_aggregate_equals_run() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::new(8, 2, 0, 3);
        cfg.max_iter = 200;
        cfg.output_dir = dir.path().to_path_buf();
        let rep = run_sweep(&cfg, &[4]).unwrap();
        assert_eq!(rep.aggregate_average_db, rep.runs[0].average_db);
        assert_eq!(rep.aggregate_minimum_db, rep.runs[0].average_db);
        assert!(dir.path().join(SWEEP_FILE).exists());
        assert!(dir.path().join("seed_4").join("summary.json").exists());
    }

    #[test]
    fn minimum_never_exceeds_average() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::new(8, 2, 0, 3);
        cfg.max_iter = 100;
        cfg.output_dir = dir.path().to_path_buf();
        let rep = run_sweep(&cfg, &[1, 2, 3]).unwrap();
        assert!(rep.aggregate_minimum_db <= rep.aggregate_average_db);
    }
}

//! The `design` run and its files: phases, sequences, trace, two-sided
//! correlation profile and a JSON summary.
//!
//! Floats are written with Rust's shortest round-trip formatting, so reading
//! a file back reproduces the exact values. Non-finite values are spelled
//! `inf`, `-inf` and `NaN` in CSV and as strings in JSON.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Serialize, Serializer};

use crate::config::RunConfig;
use crate::diagnostics::{
    default_stationarity_step, stationarity_residual, ConvergenceRecord, TheoryReport,
};
use crate::error::{Error, Result};
use crate::metrics::{ccl, correlation_profile, isl, level_summary, LevelSummary};
use crate::phase::{phases_to_sequences, PhaseMatrix};
use crate::solver::{solve, Algorithm, SolveOutcome, StopReason};

pub const PHASES_FILE: &str = "phases.csv";
pub const SEQUENCES_FILE: &str = "sequences.csv";
pub const TRACE_FILE: &str = "trace.csv";
pub const PROFILE_FILE: &str = "correlation_profile.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// Writes finite floats as JSON numbers and the rest as strings.
pub fn ser_float<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str(&fmt_float(*v))
    }
}

pub(crate) fn fmt_float(v: f64) -> String {
    format!("{v:?}")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub algorithm: Algorithm,
    pub stop_reason: StopReason,
    pub iterations: usize,
    pub n_len: usize,
    pub m_count: usize,
    pub lag_lo: usize,
    pub lag_hi: usize,
    #[serde(serialize_with = "ser_float")]
    pub initial_objective: f64,
    #[serde(serialize_with = "ser_float")]
    pub objective: f64,
    #[serde(serialize_with = "ser_float")]
    pub isl: f64,
    #[serde(serialize_with = "ser_float")]
    pub ccl: f64,
    pub level: LevelSummary,
    #[serde(serialize_with = "ser_float")]
    pub final_combined_residual: f64,
    #[serde(serialize_with = "ser_float")]
    pub consensus_gap: f64,
    #[serde(serialize_with = "ser_float")]
    pub stationarity_residual: f64,
    pub theory: TheoryReport,
    pub momentum_restarted: bool,
    pub config: RunConfig,
}

/// Computes the summary of a finished run.
pub fn summarize(cfg: &RunConfig, outcome: &SolveOutcome) -> Result<RunSummary> {
    let t = cfg.lag_set()?;
    let x = phases_to_sequences(&outcome.phi);
    let last = outcome.trace.last();
    let isl = isl(&x, &t)?;
    let ccl = ccl(&x, &t)?;
    let eta = default_stationarity_step(cfg.n_len, cfg.m_count, &t)?;
    Ok(RunSummary {
        algorithm: cfg.algorithm,
        stop_reason: outcome.stop,
        iterations: outcome.iterations(),
        n_len: cfg.n_len,
        m_count: cfg.m_count,
        lag_lo: cfg.lag_lo,
        lag_hi: cfg.lag_hi,
        initial_objective: outcome.initial_objective,
        objective: crate::metrics::objective_total(&outcome.phi, &t)?.value(),
        isl,
        ccl,
        level: level_summary(&x, &t)?,
        final_combined_residual: last.map_or(f64::NAN, |r| r.combined_residual),
        consensus_gap: crate::diagnostics::consensus_gap(&outcome.state),
        stationarity_residual: stationarity_residual(&outcome.phi, &t, eta)?,
        theory: outcome.theory,
        momentum_restarted: outcome.momentum_restarted,
        config: cfg.clone(),
    })
}

#[derive(Debug, Clone)]
pub struct DesignReport {
    pub outcome: SolveOutcome,
    pub summary: RunSummary,
    pub dir: PathBuf,
}

/// Solves the configured problem and writes all output files.
///
/// A diverged run still writes its files; the caller inspects
/// `summary.stop_reason`.
pub fn run_design(cfg: &RunConfig) -> Result<DesignReport> {
    let outcome = solve(&cfg.solver_config()?)?;
    let summary = summarize(cfg, &outcome)?;
    write_outputs(&cfg.output_dir, cfg, &outcome, &summary)?;
    Ok(DesignReport {
        outcome,
        summary,
        dir: cfg.output_dir.clone(),
    })
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

fn finish(mut w: csv::Writer<fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_outputs(
    dir: &Path,
    cfg: &RunConfig,
    outcome: &SolveOutcome,
    summary: &RunSummary,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_phases(&dir.join(PHASES_FILE), &outcome.phi)?;
    write_sequences(&dir.join(SEQUENCES_FILE), &outcome.phi)?;
    write_trace(&dir.join(TRACE_FILE), &outcome.trace)?;
    let profile = correlation_profile(&phases_to_sequences(&outcome.phi), cfg.lag_hi)?;
    write_profile(&dir.join(PROFILE_FILE), &profile)?;
    write_summary(&dir.join(SUMMARY_FILE), summary)
}

pub fn write_phases(path: &Path, phi: &PhaseMatrix) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record((0..phi.m_count()).map(|m| format!("phi_{m}")))?;
    for row in phi.as_array().rows() {
        w.write_record(row.iter().map(|&v| fmt_float(v)))?;
    }
    finish(w, path)
}

pub fn write_sequences(path: &Path, phi: &PhaseMatrix) -> Result<()> {
    let x = phases_to_sequences(phi);
    let mut w = csv_writer(path)?;
    w.write_record((0..phi.m_count()).flat_map(|m| [format!("re_{m}"), format!("im_{m}")]))?;
    for row in x.as_array().rows() {
        w.write_record(row.iter().flat_map(|z| [fmt_float(z.re), fmt_float(z.im)]))?;
    }
    finish(w, path)
}

pub fn write_trace(path: &Path, trace: &[ConvergenceRecord]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "k",
        "objective",
        "aug_lagrangian",
        "combined_residual",
        "consensus_gap",
        "wall_ms",
    ])?;
    for r in trace {
        w.write_record([
            r.k.to_string(),
            fmt_float(r.objective),
            fmt_float(r.aug_lagrangian),
            fmt_float(r.combined_residual),
            fmt_float(r.consensus_gap),
            fmt_float(r.wall_ms),
        ])?;
    }
    finish(w, path)
}

pub fn write_profile(path: &Path, profile: &[(isize, f64)]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["n", "level_db"])?;
    for &(n, level) in profile {
        w.write_record([n.to_string(), fmt_float(level)])?;
    }
    finish(w, path)
}

pub fn write_summary(path: &Path, summary: &RunSummary) -> Result<()> {
    let mut text = serde_json::to_string_pretty(summary)?;
    text.push('\n');
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

fn parse_field(path: &Path, s: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| {
        Error::InvalidInput(format!(
            "{}: cannot parse {s:?} as a number",
            path.display()
        ))
    })
}

fn read_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    r.records()
        .map(|rec| rec?.iter().map(|s| parse_field(path, s)).collect())
        .collect()
}

pub fn read_phases(path: &Path) -> Result<PhaseMatrix> {
    let rows = read_rows(path)?;
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(Error::InvalidInput(format!(
            "{}: ragged rows",
            path.display()
        )));
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let n = flat.len().checked_div(m).unwrap_or(0);
    let arr = ndarray::Array2::from_shape_vec((n, m), flat)
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    PhaseMatrix::new(arr)
}

pub fn read_trace(path: &Path) -> Result<Vec<ConvergenceRecord>> {
    read_rows(path)?
        .into_iter()
        .map(|r| match r.as_slice() {
            &[k, objective, aug_lagrangian, combined_residual, consensus_gap, wall_ms] => {
                Ok(ConvergenceRecord {
                    k: k as usize,
                    objective,
                    aug_lagrangian,
                    combined_residual,
                    consensus_gap,
                    wall_ms,
                })
            }
            _ => Err(Error::InvalidInput(format!(
                "{}: expected 6 columns",
                path.display()
            ))),
        })
        .collect()
}

pub fn read_profile(path: &Path) -> Result<Vec<(isize, f64)>> {
    read_rows(path)?
        .into_iter()
        .map(|r| match r.as_slice() {
            &[n, level] => Ok((n as isize, level)),
            _ => Err(Error::InvalidInput(format!(
                "{}: expected 2 columns",
                path.display()
            ))),
        })
        .collect()
}

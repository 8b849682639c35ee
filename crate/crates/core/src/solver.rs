//! Iteration driver shared by the ADMM and PDMM solvers: initialization,
//! block sampling, momentum, trace recording, theory checks and stopping.

use std::f64::consts::TAU;
use std::time::Instant;

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::accel::{sbcd_mask, AccelConfig, MomentumGuard};
use crate::diagnostics::{
    augmented_lagrangian, consensus_gap, residuals, termination_met, ConvergenceRecord,
    ResidualReport, TheoryChecks, TheoryMonitor, TheoryReport,
};
use crate::error::{Error, Result};
use crate::lags::LagSet;
use crate::metrics::objective_total;
use crate::phase::{clamp_phase, wrap_with_turns, PhaseMatrix, Projection};
use crate::state::{seeded_rng, InitOptions, SeedStream, SolverState};
use crate::{admm, pdmm};

pub const DEFAULT_EPSILON: f64 = 1e-4;
pub const DEFAULT_MAX_ITER: usize = 50_000;
/// PDMM aborts once the objective exceeds this multiple of its initial value.
pub const DIVERGENCE_FACTOR: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    #[default]
    Admm,
    Pdmm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Converged,
    IterationBudget,
    Diverged,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StopReason::Converged => "converged",
            StopReason::IterationBudget => "iteration-budget",
            StopReason::Diverged => "diverged",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub n_len: usize,
    pub m_count: usize,
    pub lags: LagSet,
    pub algorithm: Algorithm,
    pub init: InitOptions,
    pub epsilon: f64,
    pub max_iter: usize,
    pub projection: Projection,
    pub theory_checks: TheoryChecks,
    pub accel: AccelConfig,
    /// Fill `wall_ms` in the trace. Off keeps traces byte-reproducible.
    pub record_timing: bool,
}

impl SolverConfig {
    pub fn new(n_len: usize, m_count: usize, lags: LagSet, algorithm: Algorithm) -> Self {
        Self {
            n_len,
            m_count,
            lags,
            algorithm,
            init: InitOptions::default(),
            epsilon: DEFAULT_EPSILON,
            max_iter: DEFAULT_MAX_ITER,
            projection: Projection::Wrap,
            theory_checks: TheoryChecks::Report,
            accel: AccelConfig::default(),
            record_timing: false,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.init.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::config(
                "epsilon",
                format!("must be positive, got {}", self.epsilon),
            ));
        }
        self.accel.validate()
    }

    pub(crate) fn initial_state(&self) -> Result<SolverState> {
        let mut init = self.init;
        init.theory_checked = self.theory_checks == TheoryChecks::Strict;
        SolverState::initialize(
            self.n_len,
            self.m_count,
            &self.lags,
            self.algorithm == Algorithm::Pdmm,
            &init,
        )
    }
}

/// Per-iteration summary returned by the single-step entry points.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub objective: f64,
    pub aug_lagrangian: f64,
    pub residuals: ResidualReport,
    pub consensus_gap: f64,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    /// Final global phases, on `[0, 2π)`.
    pub phi: PhaseMatrix,
    pub trace: Vec<ConvergenceRecord>,
    pub stop: StopReason,
    pub state: SolverState,
    pub initial_objective: f64,
    pub theory: TheoryReport,
    pub momentum_restarted: bool,
}

impl SolveOutcome {
    pub fn iterations(&self) -> usize {
        self.state.k
    }
}

/// Knobs for one step beyond the plain update rules.
#[derive(Debug, Clone, Copy)]
pub(crate) struct StepControl<'a> {
    pub projection: Projection,
    /// Blocks updated this iteration; `None` means all.
    pub active: Option<&'a [bool]>,
    pub omega: f64,
    /// Global iterate of the previous iteration (PDMM momentum).
    pub prev_phi: Option<&'a PhaseMatrix>,
}

impl StepControl<'_> {
    pub fn plain(projection: Projection) -> Self {
        Self {
            projection,
            active: None,
            omega: 0.0,
            prev_phi: None,
        }
    }

    pub fn is_active(&self, idx: usize) -> bool {
        self.active.is_none_or(|m| m[idx])
    }
}

pub(crate) struct StepResult {
    pub next: SolverState,
    /// `Σ_n f_n(Φ^{k+1})`.
    pub objective: f64,
}

/// Projects a raw global iterate. In wrap mode also returns the per-entry
/// multiple of 2π that was added, which the caller applies to every block
/// copy so all variables stay in one frame.
pub(crate) fn project_global(
    raw: &Array2<f64>,
    projection: Projection,
) -> Result<(PhaseMatrix, Option<Array2<f64>>)> {
    if let Some(v) = raw.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "non-finite phase {v} in global update"
        )));
    }
    match projection {
        Projection::Wrap => {
            let mut wrapped = Array2::zeros(raw.dim());
            let mut shift = Array2::zeros(raw.dim());
            let mut any = false;
            Zip::from(&mut wrapped)
                .and(&mut shift)
                .and(raw)
                .for_each(|w, s, &r| {
                    let (v, turns) = wrap_with_turns(r);
                    *w = v;
                    if turns != 0.0 {
                        *s = -turns * TAU;
                        any = true;
                    }
                });
            Ok((PhaseMatrix::from(wrapped), any.then_some(shift)))
        }
        Projection::Clamp => Ok((clamp_phase(&PhaseMatrix::from(raw.clone()))?, None)),
    }
}

pub(crate) fn shifted(phi: &PhaseMatrix, shift: Option<&Array2<f64>>) -> PhaseMatrix {
    match shift {
        Some(s) => PhaseMatrix::from(phi.as_array() + s),
        None => phi.clone(),
    }
}

pub(crate) fn make_record(prev: &SolverState, step: &StepResult) -> Result<IterationRecord> {
    Ok(IterationRecord {
        k: step.next.k,
        objective: step.objective,
        aug_lagrangian: augmented_lagrangian(&step.next),
        residuals: residuals(prev, &step.next)?,
        consensus_gap: consensus_gap(&step.next),
    })
}

/// Runs the configured algorithm to termination.
pub fn solve(config: &SolverConfig) -> Result<SolveOutcome> {
    config.validate()?;
    let mut state = config.initial_state()?;
    let start = Instant::now();

    let initial_objective = objective_total(&state.phi, &state.lags)?.value();
    let mut l_prev = augmented_lagrangian(&state);
    let omega = config.accel.momentum();
    let plain = !config.accel.sbcd_enabled && omega == 0.0;
    let mut monitor = TheoryMonitor::new(config.theory_checks, &state, plain, l_prev);
    let mut guard = MomentumGuard::new(omega);
    let mut sampler = seeded_rng(config.init.seed, SeedStream::BlockSampling);
    let mut prev_phi: Option<PhaseMatrix> = None;
    let mut trace = Vec::with_capacity(config.max_iter.min(1 << 16));
    let mut stop = StopReason::IterationBudget;

    for _ in 0..config.max_iter {
        let mask = config.accel.sbcd_enabled.then(|| {
            sbcd_mask(
                state.blocks.len(),
                config.accel.sbcd_probability,
                &mut sampler,
            )
        });
        let ctl = StepControl {
            projection: config.projection,
            active: mask.as_deref(),
            omega: guard.omega(),
            prev_phi: prev_phi.as_ref(),
        };
        let step = match config.algorithm {
            Algorithm::Admm => admm::step(&state, &ctl)?,
            Algorithm::Pdmm => pdmm::step(&state, &ctl)?,
        };
        let record = make_record(&state, &step)?;
        monitor.observe(&state, &step.next, l_prev, record.aug_lagrangian)?;
        guard.observe(record.aug_lagrangian);

        let wall_ms = if config.record_timing {
            start.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        };
        trace.push(ConvergenceRecord {
            k: record.k,
            objective: record.objective,
            aug_lagrangian: record.aug_lagrangian,
            combined_residual: record.residuals.combined,
            consensus_gap: record.consensus_gap,
            wall_ms,
        });

        let blown = !record.objective.is_finite()
            || !record.aug_lagrangian.is_finite()
            || (config.algorithm == Algorithm::Pdmm
                && record.objective > DIVERGENCE_FACTOR * initial_objective);
        prev_phi = Some(std::mem::replace(&mut state, step.next).phi);
        l_prev = record.aug_lagrangian;

        if termination_met(&record.residuals, config.epsilon) {
            stop = StopReason::Converged;
            break;
        }
        if blown {
            stop = StopReason::Diverged;
            break;
        }
    }

    Ok(SolveOutcome {
        phi: state.phi.clone(),
        trace,
        stop,
        state,
        initial_objective,
        theory: monitor.report,
        momentum_restarted: guard.restarted,
    })
}

//! Residuals, termination, augmented Lagrangian, stationarity and runtime
//! checks of the sufficient-decrease and lower-bound properties.
//!
//! All differences between phase matrices are shortest angular differences,
//! so a 2π re-representation of an iterate never shows up as progress.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gradient::grad_total;
use crate::lags::LagSet;
use crate::metrics::lag_term;
use crate::phase::{
    angle_diff_matrix, check_same_shape, phases_to_sequences, wrap_with_turns, PhaseMatrix,
};
use crate::state::{SolverState, Splitting};

fn sq_norm(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum()
}

fn inner(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    /// `‖ρ_n(Φ_n^{k+1} − Φ^k)‖²_F` per block, in block order.
    pub primal_sq_per_lag: Vec<f64>,
    /// `‖Φ^{k+1} − Φ^k‖²_F`.
    pub dual_sq: f64,
    /// `Σ primal + (#blocks)·dual`.
    pub combined: f64,
}

/// One row of a convergence trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub k: usize,
    pub objective: f64,
    pub aug_lagrangian: f64,
    pub combined_residual: f64,
    pub consensus_gap: f64,
    pub wall_ms: f64,
}

pub fn residuals(prev: &SolverState, next: &SolverState) -> Result<ResidualReport> {
    check_same_shape(prev.phi.dim(), next.phi.dim())?;
    if prev.blocks.len() != next.blocks.len() {
        return Err(Error::InvalidInput(format!(
            "block count changed from {} to {}",
            prev.blocks.len(),
            next.blocks.len()
        )));
    }
    let primal_sq_per_lag = next
        .blocks
        .iter()
        .map(|b| {
            check_same_shape(prev.phi.dim(), b.phi.dim())?;
            let d = angle_diff_matrix(b.phi.as_array(), prev.phi.as_array());
            Ok(b.rho * b.rho * sq_norm(&d))
        })
        .collect::<Result<Vec<_>>>()?;
    let dual_sq = sq_norm(&angle_diff_matrix(next.phi.as_array(), prev.phi.as_array()));
    let combined = primal_sq_per_lag.iter().sum::<f64>() + primal_sq_per_lag.len() as f64 * dual_sq;
    Ok(ResidualReport {
        primal_sq_per_lag,
        dual_sq,
        combined,
    })
}

pub fn termination_met(report: &ResidualReport, epsilon: f64) -> bool {
    report.combined <= epsilon
}

/// `max_n ‖Φ_n − Φ‖_F`.
pub fn consensus_gap(state: &SolverState) -> f64 {
    state
        .blocks
        .iter()
        .map(|b| sq_norm(&angle_diff_matrix(b.phi.as_array(), state.phi.as_array())).sqrt())
        .fold(0.0, f64::max)
}

/// `Σ_n f_n(Φ_n) + ⟨Λ_n, Φ_n − Φ⟩ + (ρ_n/2)‖Φ_n − Φ‖²`, plus `f_0(Φ)` when
/// the zero lag lives on the global variable.
pub fn augmented_lagrangian(state: &SolverState) -> f64 {
    let per_block: Vec<f64> = state
        .blocks
        .par_iter()
        .map(|b| {
            let x = phases_to_sequences(&b.phi);
            let d = angle_diff_matrix(b.phi.as_array(), state.phi.as_array());
            lag_term(x.as_array().view(), b.lag) + inner(&b.lambda, &d) + 0.5 * b.rho * sq_norm(&d)
        })
        .collect();
    let mut total: f64 = per_block.iter().sum();
    if let Splitting::ZeroLagOnGlobal { .. } = state.splitting {
        let x = phases_to_sequences(&state.phi);
        total += lag_term(x.as_array().view(), 0);
    }
    total
}

/// Projected-gradient stationarity measure
/// `‖wrap(Φ − η Σ∇f_n(Φ)) ⊖ Φ‖_F / η`, with `⊖` the shortest angular
/// difference. Zero exactly at first-order stationary points of the
/// periodic problem.
pub fn stationarity_residual(phi: &PhaseMatrix, t: &LagSet, eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::InvalidInput(format!("step {eta} must be positive")));
    }
    let g = grad_total(phi, t)?;
    let stepped = phi.as_array() - &(g.as_array() * eta);
    let wrapped = stepped.mapv(|v| wrap_with_turns(v).0);
    let d = angle_diff_matrix(&wrapped, phi.as_array());
    Ok(sq_norm(&d).sqrt() / eta)
}

/// Default stationarity step `1 / Σ_n L_n`.
pub fn default_stationarity_step(n_len: usize, m_count: usize, t: &LagSet) -> Result<f64> {
    let l = crate::gradient::lipschitz_bound(n_len, m_count)?.value();
    Ok(1.0 / (l * t.len() as f64))
}

/// `(c̄, c̃)` of the sufficient-decrease inequality.
pub fn sufficient_decrease_coefficients(rho: f64, l: f64) -> (f64, f64) {
    let c_bar = rho.powi(3) - 7.0 * rho * rho * l - 8.0 * rho * l * l - 32.0 * l.powi(3);
    let c_tilde = rho.powi(3) - 12.0 * rho * l * l - 48.0 * l.powi(3);
    (c_bar, c_tilde)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TheoryChecks {
    Off,
    #[default]
    Report,
    /// Abort on the first violation.
    Strict,
}

/// Counters for the runtime theory checks of one run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct TheoryReport {
    /// Iterations where the augmented Lagrangian was compared to its predecessor.
    pub monotone_checked: usize,
    /// `L^{k+1} > L^k + 1e-9·|L^k|`.
    pub monotone_violations: usize,
    pub sufficient_decrease_checked: usize,
    pub sufficient_decrease_violations: usize,
    /// Largest `bound − drop` seen, relative to `1 + |L^k|`.
    pub worst_decrease_shortfall: f64,
    pub lower_bound_checked: usize,
    pub lower_bound_violations: usize,
    pub min_aug_lagrangian: f64,
}

/// Relative slack for the monotonicity and sufficient-decrease checks.
pub const DESCENT_SLACK: f64 = 1e-9;

pub(crate) struct TheoryMonitor {
    mode: TheoryChecks,
    /// Sufficient decrease applies: plain ADMM with c̄, c̃ ≥ 0.
    decrease_applies: bool,
    /// Lower bound applies: ADMM with ρ > 5L.
    lower_applies: bool,
    initial_lagrangian: f64,
    pub report: TheoryReport,
}

impl TheoryMonitor {
    pub fn new(
        mode: TheoryChecks,
        state: &SolverState,
        plain_admm: bool,
        initial_lagrangian: f64,
    ) -> Self {
        let admm = plain_admm && matches!(state.splitting, Splitting::Consensus);
        let coeffs_ok = state.blocks.iter().all(|b| {
            let (cb, ct) = sufficient_decrease_coefficients(b.rho, b.lipschitz);
            cb >= 0.0 && ct >= 0.0
        });
        let lower = state.blocks.iter().all(|b| b.rho > 5.0 * b.lipschitz);
        Self {
            mode,
            decrease_applies: admm && coeffs_ok,
            lower_applies: admm && lower,
            initial_lagrangian,
            report: TheoryReport {
                min_aug_lagrangian: initial_lagrangian,
                ..Default::default()
            },
        }
    }

    /// Records the transition `prev -> next`. The descent checks presume
    /// multipliers produced by a dual step, so they are skipped when `prev`
    /// is the random initial state.
    pub fn observe(
        &mut self,
        prev: &SolverState,
        next: &SolverState,
        l_prev: f64,
        l_next: f64,
    ) -> Result<()> {
        if self.mode == TheoryChecks::Off {
            return Ok(());
        }
        let mut failures = Vec::new();
        self.report.min_aug_lagrangian = self.report.min_aug_lagrangian.min(l_next);

        if self.decrease_applies && prev.k > 0 {
            self.report.monotone_checked += 1;
            if l_next > l_prev + DESCENT_SLACK * l_prev.abs() {
                self.report.monotone_violations += 1;
                failures.push(format!(
                    "augmented Lagrangian rose from {l_prev} to {l_next} at k = {}",
                    next.k
                ));
            }
            {
                self.report.sufficient_decrease_checked += 1;
                let dphi = sq_norm(&angle_diff_matrix(next.phi.as_array(), prev.phi.as_array()));
                let bound: f64 = next
                    .blocks
                    .iter()
                    .zip(&prev.blocks)
                    .map(|(b1, b0)| {
                        let (cb, ct) = sufficient_decrease_coefficients(b1.rho, b1.lipschitz);
                        let dn = sq_norm(&angle_diff_matrix(b1.phi.as_array(), b0.phi.as_array()));
                        (cb * dn + ct * dphi) / (2.0 * b1.rho * b1.rho)
                    })
                    .sum();
                let drop = l_prev - l_next;
                let scale = 1.0 + l_prev.abs();
                let shortfall = (bound - drop) / scale;
                if shortfall > self.report.worst_decrease_shortfall {
                    self.report.worst_decrease_shortfall = shortfall;
                }
                if drop < bound - DESCENT_SLACK * scale {
                    self.report.sufficient_decrease_violations += 1;
                    failures.push(format!(
                        "sufficient decrease failed at k = {}: drop {drop} < bound {bound}",
                        next.k
                    ));
                }
            }
        }
        if self.lower_applies {
            self.report.lower_bound_checked += 1;
            if l_next < -DESCENT_SLACK * (1.0 + self.initial_lagrangian.abs()) {
                self.report.lower_bound_violations += 1;
                failures.push(format!(
                    "augmented Lagrangian {l_next} < 0 at k = {}",
                    next.k
                ));
            }
        }
        if self.mode == TheoryChecks::Strict && !failures.is_empty() {
            return Err(Error::TheoryCheck(failures.join("; ")));
        }
        Ok(())
    }
}

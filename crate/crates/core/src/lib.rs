//! Design of unimodular sequence sets with low auto- and cross-correlation
//! over a window of lags, using consensus ADMM or a Jacobi primal-dual
//! variant over per-lag blocks.
//!
//! ```no_run
//! use unimod::{solve, Algorithm, LagSet, SolverConfig};
//!
//! let lags = LagSet::range(0, 19, 64)?;
//! let out = solve(&SolverConfig::new(64, 3, lags, Algorithm::Admm).with_seed(1))?;
//! println!("{} after {} iterations", out.stop, out.iterations());
//! # Ok::<(), unimod::Error>(())
//! ```

pub mod accel;
pub mod admm;
pub mod config;
pub mod correlation;
pub mod diagnostics;
pub mod error;
pub mod gradient;
pub mod lags;
pub mod metrics;
pub mod output;
pub mod pdmm;
pub mod phase;
pub mod solver;
pub mod state;
pub mod sweep;
pub mod verify;

pub use accel::{agd_extrapolate, sbcd_select, AccelConfig};
pub use admm::{admm_dual_update, admm_init, admm_iterate, admm_phi_update, admm_phin_update};
pub use config::{load_config, parse_config, Overrides, RunConfig};
pub use correlation::{negative_lag_correlation, shift_correlation, CorrelationMatrix};
pub use diagnostics::{
    augmented_lagrangian, consensus_gap, residuals, stationarity_residual, termination_met,
    ConvergenceRecord, ResidualReport, TheoryChecks, TheoryReport,
};
pub use error::{Error, Result};
pub use gradient::{
    grad_fd_oracle, grad_fn, grad_total, lipschitz_bound, GradientMatrix, LipschitzConstant,
};
pub use lags::LagSet;
pub use metrics::{ccl, correlation_level_db, isl, objective_fn, objective_total, ObjectiveValue};
pub use output::{run_design, DesignReport, RunSummary};
pub use pdmm::{pdmm_dual_update, pdmm_init, pdmm_iterate, pdmm_phi_update, pdmm_phin_update};
pub use phase::{
    angle_diff, clamp_phase, phases_to_sequences, wrap_phase, PhaseMatrix, Projection, SequenceSet,
};
pub use solver::{solve, Algorithm, IterationRecord, SolveOutcome, SolverConfig, StopReason};
pub use state::{InitOptions, LambdaInit, SolverState};
pub use sweep::{parse_seeds, run_sweep, SweepReport};
pub use verify::{run_verify, VerifyOptions, VerifyReport, VerifySizes};

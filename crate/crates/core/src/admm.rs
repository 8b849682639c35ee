//! Consensus ADMM over lag blocks.
//!
//! Each lag owns a local copy `Φ_n` and multiplier `Λ_n`. One iteration
//! averages the local copies into the global phases, takes one linearized
//! proximal step per block from the new global point, then moves each
//! multiplier along its consensus violation.

use ndarray::{Array2, Zip};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gradient::value_and_grad_into;
use crate::lags::LagSet;
use crate::metrics::lag_term;
use crate::phase::{check_same_shape, phases_to_sequences, PhaseMatrix, Projection};
use crate::solver::{
    make_record, project_global, shifted, IterationRecord, StepControl, StepResult,
};
use crate::state::{Block, InitOptions, SolverState, Splitting};

/// Random start: uniform phases, every block a copy of them, multipliers as
/// configured and `ρ_n = rho_multiplier · L`.
pub fn admm_init(
    n_len: usize,
    m_count: usize,
    t: &LagSet,
    opts: &InitOptions,
) -> Result<SolverState> {
    SolverState::initialize(n_len, m_count, t, false, opts)
}

fn require_consensus(state: &SolverState) -> Result<()> {
    if state.splitting != Splitting::Consensus {
        return Err(Error::InvalidInput(
            "state was initialized for pdmm, not admm".into(),
        ));
    }
    state.validate()
}

/// Unprojected global update. With equal penalties this is the plain mean of
/// `Φ_n + Λ_n/ρ_n`; otherwise the penalty-weighted mean.
fn consensus_target(state: &SolverState) -> Array2<f64> {
    let dim = state.phi.dim();
    let mut acc = Array2::<f64>::zeros(dim);
    if state.equal_penalties() {
        for b in &state.blocks {
            Zip::from(&mut acc)
                .and(b.phi.as_array())
                .and(&b.lambda)
                .for_each(|a, &p, &l| *a += p + l / b.rho);
        }
        acc /= state.blocks.len() as f64;
    } else {
        let mut weight = 0.0;
        for b in &state.blocks {
            Zip::from(&mut acc)
                .and(b.phi.as_array())
                .and(&b.lambda)
                .for_each(|a, &p, &l| *a += b.rho * p + l);
            weight += b.rho;
        }
        acc /= weight;
    }
    acc
}

/// Global update `Φ^{k+1}`, projected as requested.
pub fn admm_phi_update(state: &SolverState, projection: Projection) -> Result<PhaseMatrix> {
    require_consensus(state)?;
    Ok(project_global(&consensus_target(state), projection)?.0)
}

fn local_step(block: &Block, phi_next: &Array2<f64>, grad: &Array2<f64>) -> Array2<f64> {
    let step = block.rho + block.lipschitz;
    let mut out = phi_next.clone();
    Zip::from(&mut out)
        .and(grad)
        .and(&block.lambda)
        .for_each(|o, &g, &l| *o -= (g + l) / step);
    out
}

fn dual_step(block: &Block, phi_next: &Array2<f64>, phin_next: &Array2<f64>) -> Array2<f64> {
    let mut out = block.lambda.clone();
    Zip::from(&mut out)
        .and(phin_next)
        .and(phi_next)
        .for_each(|l, &pn, &p| *l += block.rho * (pn - p));
    out
}

/// Local update `Φ_n^{k+1} = Φ^{k+1} − (∇f_n(Φ^{k+1}) + Λ_n)/(ρ_n + L_n)`.
pub fn admm_phin_update(
    state: &SolverState,
    lag: usize,
    phi_next: &PhaseMatrix,
) -> Result<PhaseMatrix> {
    require_consensus(state)?;
    check_same_shape(state.phi.dim(), phi_next.dim())?;
    let block = &state.blocks[state.block_index(lag)?];
    let x = phases_to_sequences(phi_next);
    let mut g = Array2::zeros(phi_next.dim());
    value_and_grad_into(x.as_array().view(), lag, &mut g);
    Ok(PhaseMatrix::from(local_step(
        block,
        phi_next.as_array(),
        &g,
    )))
}

/// Multiplier update `Λ_n + ρ_n(Φ_n^{k+1} − Φ^{k+1})`.
pub fn admm_dual_update(
    state: &SolverState,
    lag: usize,
    phi_next: &PhaseMatrix,
    phin_next: &PhaseMatrix,
) -> Result<Array2<f64>> {
    require_consensus(state)?;
    check_same_shape(state.phi.dim(), phi_next.dim())?;
    check_same_shape(state.phi.dim(), phin_next.dim())?;
    let block = &state.blocks[state.block_index(lag)?];
    Ok(dual_step(block, phi_next.as_array(), phin_next.as_array()))
}

pub(crate) fn step(state: &SolverState, ctl: &StepControl<'_>) -> Result<StepResult> {
    require_consensus(state)?;
    let mut raw = consensus_target(state);
    if ctl.omega > 0.0 {
        raw = crate::accel::extrapolate_raw(&raw, state.phi.as_array(), ctl.omega);
    }
    let (phi_next, shift) = project_global(&raw, ctl.projection)?;
    let x = phases_to_sequences(&phi_next);
    let xv = x.as_array().view();

    let updated: Vec<(Block, f64)> = state
        .blocks
        .par_iter()
        .enumerate()
        .map(|(idx, b)| {
            if ctl.is_active(idx) {
                let mut g = Array2::zeros(phi_next.dim());
                let f = value_and_grad_into(xv, b.lag, &mut g);
                let phin = local_step(b, phi_next.as_array(), &g);
                let lambda = dual_step(b, phi_next.as_array(), &phin);
                (
                    Block {
                        phi: PhaseMatrix::from(phin),
                        lambda,
                        ..b.clone()
                    },
                    f,
                )
            } else {
                let f = lag_term(xv, b.lag);
                (
                    Block {
                        phi: shifted(&b.phi, shift.as_ref()),
                        ..b.clone()
                    },
                    f,
                )
            }
        })
        .collect();

    let objective = updated.iter().map(|(_, f)| f).sum();
    let next = SolverState {
        phi: phi_next,
        blocks: updated.into_iter().map(|(b, _)| b).collect(),
        splitting: state.splitting,
        lags: state.lags.clone(),
        k: state.k + 1,
    };
    Ok(StepResult { next, objective })
}

/// One full iteration with all blocks and no momentum.
pub fn admm_iterate(
    state: &SolverState,
    projection: Projection,
) -> Result<(SolverState, IterationRecord)> {
    let result = step(state, &StepControl::plain(projection))?;
    let record = make_record(state, &result)?;
    Ok((result.next, record))
}

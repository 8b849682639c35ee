//! Jacobi-style primal-dual variant.
//!
//! The zero-lag term stays on the global phases and is linearized around the
//! current global point; every nonzero lag keeps a local copy that is
//! linearized around itself. All updates in one iteration read the same
//! snapshot of the previous iterate.

use ndarray::{Array2, Zip};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gradient::value_and_grad_into;
use crate::lags::LagSet;
use crate::phase::{check_same_shape, phases_to_sequences, PhaseMatrix, Projection};
use crate::solver::{make_record, project_global, IterationRecord, StepControl, StepResult};
use crate::state::{Block, InitOptions, SolverState, Splitting};

/// Random start for a lag set containing 0; blocks cover the nonzero lags.
pub fn pdmm_init(
    n_len: usize,
    m_count: usize,
    t: &LagSet,
    opts: &InitOptions,
) -> Result<SolverState> {
    SolverState::initialize(n_len, m_count, t, true, opts)
}

fn zero_lag_lipschitz(state: &SolverState) -> Result<f64> {
    state.validate()?;
    match state.splitting {
        Splitting::ZeroLagOnGlobal { lipschitz } => Ok(lipschitz),
        Splitting::Consensus => Err(Error::InvalidInput(
            "state was initialized for admm, not pdmm".into(),
        )),
    }
}

/// `(L_0 Φ − ∇f_0(Φ) + Σ_n (Λ_n + ρ_n Φ_n)) / (L_0 + Σ_n ρ_n)` around `anchor`.
fn global_target(state: &SolverState, l0: f64, anchor: &PhaseMatrix) -> Array2<f64> {
    let x = phases_to_sequences(anchor);
    let mut g0 = Array2::zeros(anchor.dim());
    value_and_grad_into(x.as_array().view(), 0, &mut g0);

    let mut acc = anchor.as_array() * l0 - &g0;
    let mut weight = l0;
    for b in &state.blocks {
        Zip::from(&mut acc)
            .and(&b.lambda)
            .and(b.phi.as_array())
            .for_each(|a, &l, &p| *a += l + b.rho * p);
        weight += b.rho;
    }
    acc / weight
}

/// `(L_n Φ_n + ρ_n Φ − Λ_n − ∇f_n(Φ_n)) / (L_n + ρ_n)`.
fn local_target(block: &Block, anchor: &Array2<f64>) -> Array2<f64> {
    let x = phases_to_sequences(&block.phi);
    let mut g = Array2::zeros(block.phi.dim());
    value_and_grad_into(x.as_array().view(), block.lag, &mut g);
    let denom = block.lipschitz + block.rho;
    let mut out = Array2::zeros(block.phi.dim());
    Zip::from(&mut out)
        .and(block.phi.as_array())
        .and(anchor)
        .and(&block.lambda)
        .and(&g)
        .for_each(|o, &pn, &p, &l, &gn| {
            *o = (block.lipschitz * pn + block.rho * p - l - gn) / denom;
        });
    out
}

fn dual_target(block: &Block, anchor: &Array2<f64>, phin_next: &Array2<f64>) -> Array2<f64> {
    let mut out = block.lambda.clone();
    Zip::from(&mut out)
        .and(phin_next)
        .and(anchor)
        .for_each(|l, &pn, &p| *l += block.rho * (pn - p));
    out
}

fn nonzero_block(state: &SolverState, lag: usize) -> Result<&Block> {
    if lag == 0 {
        return Err(Error::InvalidInput(
            "the zero lag has no local copy in pdmm".into(),
        ));
    }
    Ok(&state.blocks[state.block_index(lag)?])
}

/// Global update `Φ^{k+1}`, projected as requested.
pub fn pdmm_phi_update(state: &SolverState, projection: Projection) -> Result<PhaseMatrix> {
    let l0 = zero_lag_lipschitz(state)?;
    Ok(project_global(&global_target(state, l0, &state.phi), projection)?.0)
}

/// Local update for a nonzero lag, read from the snapshot in `state`.
pub fn pdmm_phin_update(state: &SolverState, lag: usize) -> Result<PhaseMatrix> {
    zero_lag_lipschitz(state)?;
    let block = nonzero_block(state, lag)?;
    Ok(PhaseMatrix::from(local_target(block, state.phi.as_array())))
}

/// Multiplier update `Λ_n + ρ_n(Φ_n^{k+1} − Φ^k)`.
pub fn pdmm_dual_update(
    state: &SolverState,
    lag: usize,
    phin_next: &PhaseMatrix,
) -> Result<Array2<f64>> {
    zero_lag_lipschitz(state)?;
    check_same_shape(state.phi.dim(), phin_next.dim())?;
    let block = nonzero_block(state, lag)?;
    Ok(dual_target(
        block,
        state.phi.as_array(),
        phin_next.as_array(),
    ))
}

pub(crate) fn step(state: &SolverState, ctl: &StepControl<'_>) -> Result<StepResult> {
    let l0 = zero_lag_lipschitz(state)?;
    // Momentum replaces the global snapshot in every update of the iteration.
    let anchor = match ctl.prev_phi {
        Some(prev) if ctl.omega > 0.0 => PhaseMatrix::from(crate::accel::extrapolate_raw(
            state.phi.as_array(),
            prev.as_array(),
            ctl.omega,
        )),
        _ => state.phi.clone(),
    };
    let (phi_next, shift) = project_global(&global_target(state, l0, &anchor), ctl.projection)?;

    let blocks: Vec<Block> = state
        .blocks
        .par_iter()
        .enumerate()
        .map(|(idx, b)| {
            let (mut phin, lambda) = if ctl.is_active(idx) {
                let phin = local_target(b, anchor.as_array());
                let lambda = dual_target(b, anchor.as_array(), &phin);
                (phin, lambda)
            } else {
                (b.phi.as_array().clone(), b.lambda.clone())
            };
            if let Some(s) = &shift {
                phin += s;
            }
            Block {
                phi: PhaseMatrix::from(phin),
                lambda,
                ..b.clone()
            }
        })
        .collect();

    let next = SolverState {
        phi: phi_next,
        blocks,
        splitting: state.splitting,
        lags: state.lags.clone(),
        k: state.k + 1,
    };
    let objective = crate::metrics::objective_total(&next.phi, &next.lags)?.value();
    Ok(StepResult { next, objective })
}

/// One full Jacobi iteration with all blocks and no momentum.
pub fn pdmm_iterate(
    state: &SolverState,
    projection: Projection,
) -> Result<(SolverState, IterationRecord)> {
    let result = step(state, &StepControl::plain(projection))?;
    let record = make_record(state, &result)?;
    Ok((result.next, record))
}

//! ISL, CCL, per-lag objective terms and the dB correlation level.

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64;
use serde::Serialize;

use crate::correlation::correlate;
use crate::error::{Error, Result};
use crate::lags::LagSet;
use crate::phase::{phases_to_sequences, PhaseMatrix, SequenceSet};

/// Floor used when a -inf level has to enter an average or a plot.
pub const LEVEL_FLOOR_DB: f64 = -350.0;

/// Value of one objective term or of the total objective (always ≥ 0).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct ObjectiveValue(f64);

impl ObjectiveValue {
    pub fn value(self) -> f64 {
        self.0
    }
}

pub(crate) fn check_lags_for(t: &LagSet, n_len: usize) -> Result<()> {
    if t.max_lag() >= n_len {
        return Err(Error::InvalidLag {
            lag: t.max_lag(),
            n_len,
        });
    }
    Ok(())
}

/// `‖R_n - N·I·δ_n‖_F²` for a correlation matrix at nonnegative lag `lag`.
pub(crate) fn deviation_norm_sq(r: &Array2<Complex64>, lag: usize, n_len: usize) -> f64 {
    let target = if lag == 0 { n_len as f64 } else { 0.0 };
    r.indexed_iter()
        .map(|((a, b), z)| {
            if a == b {
                Complex64::new(z.re - target, z.im).norm_sqr()
            } else {
                z.norm_sqr()
            }
        })
        .sum()
}

pub(crate) fn lag_term(x: ArrayView2<'_, Complex64>, lag: usize) -> f64 {
    let r = correlate(x, lag);
    deviation_norm_sq(&r, lag, x.nrows())
}

/// Integrated sidelobe level over the positive lags of `t`.
pub fn isl(x: &SequenceSet, t: &LagSet) -> Result<f64> {
    check_lags_for(t, x.n_len())?;
    Ok(t.nonzero()
        .map(|n| {
            let r = correlate(x.as_array().view(), n);
            (0..x.m_count()).map(|i| r[[i, i]].norm_sqr()).sum::<f64>()
        })
        .sum())
}

/// Cross-correlation level over ordered pairs `i != j` and all lags of `t`.
pub fn ccl(x: &SequenceSet, t: &LagSet) -> Result<f64> {
    check_lags_for(t, x.n_len())?;
    Ok(t.iter()
        .map(|n| {
            let r = correlate(x.as_array().view(), n);
            r.indexed_iter()
                .filter(|((i, j), _)| i != j)
                .map(|(_, z)| z.norm_sqr())
                .sum::<f64>()
        })
        .sum())
}

pub fn objective_fn(phi: &PhaseMatrix, lag: usize, t: &LagSet) -> Result<ObjectiveValue> {
    check_lags_for(t, phi.n_len())?;
    if !t.contains(lag) {
        return Err(Error::LagNotInSet(lag));
    }
    let x = phases_to_sequences(phi);
    Ok(ObjectiveValue(lag_term(x.as_array().view(), lag)))
}

/// `Σ_{n∈T} f_n(Φ)`.
pub fn objective_total(phi: &PhaseMatrix, t: &LagSet) -> Result<ObjectiveValue> {
    check_lags_for(t, phi.n_len())?;
    let x = phases_to_sequences(phi);
    Ok(ObjectiveValue(total_from_sequences(&x, t)))
}

pub(crate) fn total_from_sequences(x: &SequenceSet, t: &LagSet) -> f64 {
    t.iter().map(|n| lag_term(x.as_array().view(), n)).sum()
}

/// `20·log10(‖R_n − NIδ_n‖_F² / (M N²))`; -inf when the norm is exactly zero.
pub fn level_db_from_norm_sq(norm_sq: f64, n_len: usize, m_count: usize) -> f64 {
    if norm_sq == 0.0 {
        return f64::NEG_INFINITY;
    }
    let scale = (m_count * n_len * n_len) as f64;
    20.0 * (norm_sq / scale).log10()
}

pub fn correlation_level_db(x: &SequenceSet, lag: usize) -> Result<f64> {
    if lag >= x.n_len() {
        return Err(Error::InvalidLag {
            lag,
            n_len: x.n_len(),
        });
    }
    let ns = lag_term(x.as_array().view(), lag);
    Ok(level_db_from_norm_sq(ns, x.n_len(), x.m_count()))
}

/// Two-sided level profile for lags `-max_lag..=max_lag`. The negative side
/// is the mirror of the positive side since `‖R_{-n}‖_F = ‖R_n‖_F`.
pub fn correlation_profile(x: &SequenceSet, max_lag: usize) -> Result<Vec<(isize, f64)>> {
    if max_lag >= x.n_len() {
        return Err(Error::InvalidLag {
            lag: max_lag,
            n_len: x.n_len(),
        });
    }
    let positive: Vec<f64> = (0..=max_lag)
        .map(|n| correlation_level_db(x, n))
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(2 * max_lag + 1);
    for n in (1..=max_lag).rev() {
        out.push((-(n as isize), positive[n]));
    }
    for (n, &lvl) in positive.iter().enumerate() {
        out.push((n as isize, lvl));
    }
    Ok(out)
}

/// Average and minimum correlation level over a lag set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelSummary {
    /// Mean of the per-lag dB levels, with -inf floored at [`LEVEL_FLOOR_DB`].
    #[serde(serialize_with = "crate::output::ser_float")]
    pub average_db: f64,
    #[serde(serialize_with = "crate::output::ser_float")]
    pub minimum_db: f64,
}

pub fn level_summary(x: &SequenceSet, t: &LagSet) -> Result<LevelSummary> {
    check_lags_for(t, x.n_len())?;
    let levels: Vec<f64> = t
        .iter()
        .map(|n| correlation_level_db(x, n))
        .collect::<Result<_>>()?;
    let average_db =
        levels.iter().map(|&l| l.max(LEVEL_FLOOR_DB)).sum::<f64>() / levels.len() as f64;
    let minimum_db = levels.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(LevelSummary {
        average_db,
        minimum_db,
    })
}

//! Stochastic block selection over lag blocks and momentum extrapolation of
//! the global phase iterate.

use ndarray::{Array2, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lags::LagSet;
use crate::phase::{angle_diff, check_same_shape, wrap_phase, PhaseMatrix};

/// Consecutive Lagrangian increases after which momentum is switched off.
pub const RESTART_WINDOW: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccelConfig {
    pub sbcd_enabled: bool,
    pub sbcd_probability: f64,
    pub agd_enabled: bool,
    pub agd_momentum: f64,
}

impl Default for AccelConfig {
    fn default() -> Self {
        Self {
            sbcd_enabled: false,
            sbcd_probability: 0.5,
            agd_enabled: false,
            agd_momentum: 0.3,
        }
    }
}

impl AccelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sbcd_probability > 0.0 && self.sbcd_probability <= 1.0) {
            return Err(Error::config(
                "sbcd_probability",
                format!("must lie in (0, 1], got {}", self.sbcd_probability),
            ));
        }
        if !(0.0..1.0).contains(&self.agd_momentum) {
            return Err(Error::config(
                "agd_momentum",
                format!("must lie in [0, 1), got {}", self.agd_momentum),
            ));
        }
        Ok(())
    }

    /// Momentum actually applied (0 when AGD is off).
    pub fn momentum(&self) -> f64 {
        if self.agd_enabled {
            self.agd_momentum
        } else {
            0.0
        }
    }
}

/// Independent Bernoulli(p) inclusion per block; an empty draw is redrawn.
pub(crate) fn sbcd_mask<R: Rng + ?Sized>(len: usize, p: f64, rng: &mut R) -> Vec<bool> {
    if p >= 1.0 {
        return vec![true; len];
    }
    loop {
        let mask: Vec<bool> = (0..len).map(|_| rng.gen_bool(p)).collect();
        if mask.iter().any(|&b| b) {
            return mask;
        }
    }
}

/// Random nonempty subset of `t`, each lag kept with probability `p`.
pub fn sbcd_select<R: Rng + ?Sized>(t: &LagSet, p: f64, rng: &mut R) -> Result<LagSet> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "selection probability {p} outside (0, 1]"
        )));
    }
    let mask = sbcd_mask(t.len(), p, rng);
    LagSet::new(t.subset(&mask), t.n_len())
}

/// `Φ^k + ω·(Φ^k − Φ^{k−1})` with the difference taken as the shortest
/// signed angle, not wrapped.
pub(crate) fn extrapolate_raw(
    current: &Array2<f64>,
    previous: &Array2<f64>,
    omega: f64,
) -> Array2<f64> {
    let mut out = current.clone();
    Zip::from(&mut out)
        .and(current)
        .and(previous)
        .for_each(|o, &c, &p| *o = c + omega * angle_diff(c, p));
    out
}

pub fn agd_extrapolate(
    phi_k: &PhaseMatrix,
    phi_prev: &PhaseMatrix,
    omega: f64,
) -> Result<PhaseMatrix> {
    check_same_shape(phi_k.dim(), phi_prev.dim())?;
    if !(0.0..1.0).contains(&omega) {
        return Err(Error::InvalidInput(format!(
            "momentum {omega} outside [0, 1)"
        )));
    }
    let raw = extrapolate_raw(phi_k.as_array(), phi_prev.as_array(), omega);
    wrap_phase(&PhaseMatrix::from(raw))
}

/// Switches momentum off for good after [`RESTART_WINDOW`] consecutive
/// increases of the augmented Lagrangian.
#[derive(Debug, Clone)]
pub(crate) struct MomentumGuard {
    omega: f64,
    rising: usize,
    last: Option<f64>,
    pub restarted: bool,
}

impl MomentumGuard {
    pub fn new(omega: f64) -> Self {
        Self {
            omega,
            rising: 0,
            last: None,
            restarted: false,
        }
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn observe(&mut self, lagrangian: f64) {
        if let Some(prev) = self.last {
            if lagrangian > prev {
                self.rising += 1;
            } else {
                self.rising = 0;
            }
        }
        self.last = Some(lagrangian);
        if self.omega > 0.0 && self.rising >= RESTART_WINDOW {
            self.omega = 0.0;
            self.restarted = true;
        }
    }
}

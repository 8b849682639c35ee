//! Phase matrices, their unimodular sequence sets, and 2π-periodic helpers.

use std::f64::consts::{PI, TAU};

use ndarray::{Array2, Zip};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// N×M matrix of phases in radians. Row `i` is the time index, column `m`
/// the sequence index.
///
/// Entries are arbitrary reals; they lie in `[0, 2π)` only after
/// [`wrap_phase`] (or the clamp projection) has been applied.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMatrix(Array2<f64>);

/// N×M matrix of unit-modulus complex entries `x_{i,m} = e^{jφ_{i,m}}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSet(Array2<Complex64>);

/// How the global phase iterate is mapped back onto `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Projection {
    /// Elementwise modulo 2π. Leaves the represented sequence unchanged.
    #[default]
    Wrap,
    /// Box clamp onto `[0, 2π)`.
    Clamp,
}

impl PhaseMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let (n, m) = values.dim();
        if n == 0 || m == 0 {
            return Err(Error::InvalidInput(format!("empty phase matrix {n}x{m}")));
        }
        Ok(Self(values))
    }

    pub fn zeros(n_len: usize, m_count: usize) -> Self {
        Self(Array2::zeros((n_len, m_count)))
    }

    /// Entries drawn uniformly from `[0, 2π)`.
    pub fn random<R: Rng + ?Sized>(n_len: usize, m_count: usize, rng: &mut R) -> Self {
        Self(Array2::from_shape_simple_fn((n_len, m_count), || {
            rng.gen_range(0.0..TAU)
        }))
    }

    pub fn n_len(&self) -> usize {
        self.0.nrows()
    }

    pub fn m_count(&self) -> usize {
        self.0.ncols()
    }

    pub fn dim(&self) -> (usize, usize) {
        self.0.dim()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn as_array_mut(&mut self) -> &mut Array2<f64> {
        &mut self.0
    }

    pub fn into_array(self) -> Array2<f64> {
        self.0
    }

    pub fn is_canonical(&self) -> bool {
        self.0.iter().all(|&p| (0.0..TAU).contains(&p))
    }
}

impl From<Array2<f64>> for PhaseMatrix {
    fn from(values: Array2<f64>) -> Self {
        Self(values)
    }
}

impl SequenceSet {
    /// Accepts a complex matrix only if every entry has unit modulus to 1e-12.
    pub fn new(values: Array2<Complex64>) -> Result<Self> {
        if let Some(z) = values.iter().find(|z| (z.norm() - 1.0).abs() > 1e-12) {
            return Err(Error::InvalidInput(format!("entry {z} is not unimodular")));
        }
        if values.is_empty() {
            return Err(Error::InvalidInput("empty sequence set".into()));
        }
        Ok(Self(values))
    }

    pub fn n_len(&self) -> usize {
        self.0.nrows()
    }

    pub fn m_count(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_array(&self) -> &Array2<Complex64> {
        &self.0
    }

    /// Phases of the entries, wrapped to `[0, 2π)`.
    pub fn phases(&self) -> PhaseMatrix {
        let raw = self.0.mapv(|z| z.arg());
        wrap_phase(&PhaseMatrix(raw)).expect("arg() is always finite")
    }
}

pub fn phases_to_sequences(phi: &PhaseMatrix) -> SequenceSet {
    SequenceSet(phi.0.mapv(|p| Complex64::new(p.cos(), p.sin())))
}

/// Reduces one phase to `[0, 2π)` and reports how many whole turns were
/// removed, so that `wrapped == raw - turns * 2π` in exact bookkeeping.
pub fn wrap_with_turns(raw: f64) -> (f64, f64) {
    let mut turns = (raw / TAU).floor();
    let mut wrapped = raw - turns * TAU;
    if wrapped >= TAU {
        wrapped -= TAU;
        turns += 1.0;
    }
    if wrapped < 0.0 {
        wrapped += TAU;
        turns -= 1.0;
    }
    // `raw` slightly below a multiple of 2π can round to exactly 2π above.
    if wrapped >= TAU {
        wrapped = 0.0;
        turns += 1.0;
    }
    (wrapped, turns)
}

/// Elementwise modulo-2π reduction onto `[0, 2π)`.
pub fn wrap_phase(phi: &PhaseMatrix) -> Result<PhaseMatrix> {
    if let Some(p) = phi.0.iter().find(|p| !p.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite phase {p}")));
    }
    Ok(PhaseMatrix(phi.0.mapv(|p| wrap_with_turns(p).0)))
}

/// Largest representable phase strictly below 2π.
const CLAMP_MAX: f64 = TAU - 4.0 * f64::EPSILON;

/// Box clamp onto `[0, 2π)`.
pub fn clamp_phase(phi: &PhaseMatrix) -> Result<PhaseMatrix> {
    if let Some(p) = phi.0.iter().find(|p| !p.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite phase {p}")));
    }
    Ok(PhaseMatrix(phi.0.mapv(|p| p.clamp(0.0, CLAMP_MAX))))
}

impl Projection {
    pub fn apply(self, phi: &PhaseMatrix) -> Result<PhaseMatrix> {
        match self {
            Projection::Wrap => wrap_phase(phi),
            Projection::Clamp => clamp_phase(phi),
        }
    }
}

/// Shortest signed angular difference `a - b`, represented in `(-π, π]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

/// Elementwise [`angle_diff`] of two equally shaped arrays.
pub fn angle_diff_matrix(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros(a.dim());
    Zip::from(&mut out)
        .and(a)
        .and(b)
        .for_each(|o, &x, &y| *o = angle_diff(x, y));
    out
}

pub(crate) fn check_same_shape(a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a != b {
        return Err(Error::ShapeMismatch {
            expected: a,
            found: b,
        });
    }
    Ok(())
}

//! Lagged auto/cross-correlation matrices `R_n = X^H S_n X`.
//!
//! Entry `(i, j)` of `R_n` is
//!
//! ```text
//! r_ijn = sum_{k=n+1}^{N} conj(x_{k,i}) * x_{k-n,j}      (1-based k)
//! ```
//!
//! so the ones of `S_n` sit on the lower off-diagonal `(k, k-n)`. Negative
//! lags follow from `R_{-n} = R_n^H`.

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::phase::SequenceSet;

/// M×M correlation matrix at a single lag.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    lag: isize,
    values: Array2<Complex64>,
}

impl CorrelationMatrix {
    pub fn lag(&self) -> isize {
        self.lag
    }

    pub fn values(&self) -> &Array2<Complex64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<Complex64> {
        self.values
    }

    /// Conjugate transpose, i.e. the matrix at the mirrored lag.
    pub fn hermitian(&self) -> CorrelationMatrix {
        CorrelationMatrix {
            lag: -self.lag,
            values: self.values.t().mapv(|z| z.conj()),
        }
    }
}

fn check_lag(n_len: usize, lag: usize) -> Result<()> {
    if lag >= n_len {
        return Err(Error::InvalidLag { lag, n_len });
    }
    Ok(())
}

/// Raw `X^H S_n X` on a view; callers validate the lag. Every entry is
/// accumulated over k in ascending order.
pub(crate) fn correlate(x: ArrayView2<'_, Complex64>, lag: usize) -> Array2<Complex64> {
    let (n_len, m_count) = x.dim();
    let mut r = Array2::<Complex64>::zeros((m_count, m_count));
    for k in lag..n_len {
        let lead = x.row(k);
        let trail = x.row(k - lag);
        for (a, &xa) in lead.iter().enumerate() {
            let ca = xa.conj();
            let mut row = r.row_mut(a);
            for (acc, &xb) in row.iter_mut().zip(trail.iter()) {
                *acc += ca * xb;
            }
        }
    }
    r
}

pub fn shift_correlation(x: &SequenceSet, lag: usize) -> Result<CorrelationMatrix> {
    check_lag(x.n_len(), lag)?;
    Ok(CorrelationMatrix {
        lag: lag as isize,
        values: correlate(x.as_array().view(), lag),
    })
}

/// `R_{-n}`, computed as `R_n^H`.
pub fn negative_lag_correlation(x: &SequenceSet, lag: usize) -> Result<CorrelationMatrix> {
    Ok(shift_correlation(x, lag)?.hermitian())
}

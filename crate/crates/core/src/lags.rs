//! Lag windows over which correlations are controlled.

use serde::Serialize;

use crate::error::{Error, Result};

/// Strictly increasing set of nonnegative lags, each valid for a sequence
/// length `n_len` (`0 <= n <= n_len - 1`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LagSet {
    lags: Vec<usize>,
    n_len: usize,
}

impl LagSet {
    pub fn new(lags: Vec<usize>, n_len: usize) -> Result<Self> {
        if lags.is_empty() {
            return Err(Error::InvalidInput("lag set is empty".into()));
        }
        if let Some(w) = lags.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(format!(
                "lags must be strictly increasing, found {} before {}",
                w[0], w[1]
            )));
        }
        if let Some(&lag) = lags.iter().find(|&&n| n >= n_len) {
            return Err(Error::InvalidLag { lag, n_len });
        }
        Ok(Self { lags, n_len })
    }

    /// Contiguous window `lo..=hi`.
    pub fn range(lo: usize, hi: usize, n_len: usize) -> Result<Self> {
        if lo > hi {
            return Err(Error::InvalidInput(format!(
                "empty lag window [{lo}, {hi}]"
            )));
        }
        Self::new((lo..=hi).collect(), n_len)
    }

    pub fn lags(&self) -> &[usize] {
        &self.lags
    }

    pub fn len(&self) -> usize {
        self.lags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lags.is_empty()
    }

    pub fn n_len(&self) -> usize {
        self.n_len
    }

    pub fn include_zero(&self) -> bool {
        self.lags.first() == Some(&0)
    }

    pub fn contains(&self, lag: usize) -> bool {
        self.lags.binary_search(&lag).is_ok()
    }

    pub fn max_lag(&self) -> usize {
        *self.lags.last().expect("lag set is never empty")
    }

    /// Lags excluding zero.
    pub fn nonzero(&self) -> impl Iterator<Item = usize> + '_ {
        self.lags.iter().copied().filter(|&n| n != 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.lags.iter().copied()
    }

    /// Subset with the given lags kept, order preserved.
    pub(crate) fn subset(&self, keep: &[bool]) -> Vec<usize> {
        self.lags
            .iter()
            .zip(keep)
            .filter_map(|(&n, &k)| k.then_some(n))
            .collect()
    }
}

//! Consensus solver state shared by the ADMM and PDMM solvers.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gradient::lipschitz_bound;
use crate::lags::LagSet;
use crate::phase::PhaseMatrix;

/// Independent random streams derived from one master seed.
///
/// Each stream is ChaCha8 seeded with the master seed and moved to its own
/// stream id, so enabling block sampling never perturbs initialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedStream {
    InitPhases = 1,
    InitMultipliers = 2,
    BlockSampling = 3,
    Verify = 4,
}

pub fn seeded_rng(seed: u64, stream: SeedStream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaInit {
    /// i.i.d. uniform on [-1, 1].
    #[default]
    Uniform,
    Zero,
}

/// How the lag terms are split between the global variable and the blocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Splitting {
    /// Every lag owns a block (ADMM).
    Consensus,
    /// The zero-lag term stays on the global variable with its own
    /// Lipschitz constant; blocks cover the nonzero lags (PDMM).
    ZeroLagOnGlobal { lipschitz: f64 },
}

/// Local copy, multiplier and parameters for one lag.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub lag: usize,
    pub phi: PhaseMatrix,
    pub lambda: Array2<f64>,
    pub rho: f64,
    pub lipschitz: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub phi: PhaseMatrix,
    pub blocks: Vec<Block>,
    pub splitting: Splitting,
    pub lags: LagSet,
    /// Completed iterations.
    pub k: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitOptions {
    pub rho_multiplier: f64,
    pub lambda_init: LambdaInit,
    pub seed: u64,
    /// Reject `rho_multiplier < 9`.
    pub theory_checked: bool,
}

impl Default for InitOptions {
    fn default() -> Self {
        Self {
            rho_multiplier: 9.0,
            lambda_init: LambdaInit::Uniform,
            seed: 0,
            theory_checked: false,
        }
    }
}

impl SolverState {
    pub(crate) fn initialize(
        n_len: usize,
        m_count: usize,
        lags: &LagSet,
        zero_on_global: bool,
        opts: &InitOptions,
    ) -> Result<Self> {
        if n_len < 2 {
            return Err(Error::InvalidInput(format!(
                "sequence length must be at least 2, got {n_len}"
            )));
        }
        let l = lipschitz_bound(n_len, m_count)?.value();
        if lags.n_len() != n_len || lags.max_lag() >= n_len {
            return Err(Error::InvalidLag {
                lag: lags.max_lag(),
                n_len,
            });
        }
        if !(opts.rho_multiplier > 0.0 && opts.rho_multiplier.is_finite()) {
            return Err(Error::config(
                "rho_multiplier",
                format!("must be positive, got {}", opts.rho_multiplier),
            ));
        }
        if opts.theory_checked && opts.rho_multiplier < 9.0 {
            return Err(Error::config(
                "rho_multiplier",
                format!(
                    "theory-checked runs need rho_multiplier >= 9, got {}",
                    opts.rho_multiplier
                ),
            ));
        }
        let splitting = if zero_on_global {
            if !lags.include_zero() {
                return Err(Error::config(
                    "lag_lo",
                    "pdmm requires lag_lo = 0 (use admm for windows without lag 0)",
                ));
            }
            if lags.len() < 2 {
                return Err(Error::config(
                    "lag_hi",
                    "pdmm needs at least one nonzero lag",
                ));
            }
            Splitting::ZeroLagOnGlobal { lipschitz: l }
        } else {
            Splitting::Consensus
        };

        let phi = PhaseMatrix::random(
            n_len,
            m_count,
            &mut seeded_rng(opts.seed, SeedStream::InitPhases),
        );
        let mut lam_rng = seeded_rng(opts.seed, SeedStream::InitMultipliers);
        let block_lags: Vec<usize> = if zero_on_global {
            lags.nonzero().collect()
        } else {
            lags.iter().collect()
        };
        let blocks = block_lags
            .into_iter()
            .map(|lag| {
                let lambda = match opts.lambda_init {
                    LambdaInit::Uniform => Array2::from_shape_simple_fn((n_len, m_count), || {
                        lam_rng.gen_range(-1.0..=1.0)
                    }),
                    LambdaInit::Zero => Array2::zeros((n_len, m_count)),
                };
                Block {
                    lag,
                    phi: phi.clone(),
                    lambda,
                    rho: opts.rho_multiplier * l,
                    lipschitz: l,
                }
            })
            .collect();
        Ok(Self {
            phi,
            blocks,
            splitting,
            lags: lags.clone(),
            k: 0,
        })
    }

    pub fn n_len(&self) -> usize {
        self.phi.n_len()
    }

    pub fn m_count(&self) -> usize {
        self.phi.m_count()
    }

    pub fn block(&self, lag: usize) -> Option<&Block> {
        self.blocks.iter().find(|b| b.lag == lag)
    }

    pub(crate) fn block_index(&self, lag: usize) -> Result<usize> {
        self.blocks
            .iter()
            .position(|b| b.lag == lag)
            .ok_or(Error::LagNotInSet(lag))
    }

    pub fn equal_penalties(&self) -> bool {
        self.blocks.windows(2).all(|w| w[0].rho == w[1].rho)
    }

    /// Checks that every matrix shares the global shape.
    pub fn validate(&self) -> Result<()> {
        let dim = self.phi.dim();
        for b in &self.blocks {
            crate::phase::check_same_shape(dim, b.phi.dim())?;
            crate::phase::check_same_shape(dim, b.lambda.dim())?;
        }
        Ok(())
    }
}

//! Self-check suites run by the `verify` command: finite-difference
//! gradient, direct-sum correlation, Lipschitz sampling and the runtime
//! descent checks on a small ADMM run.

use std::fmt::Write as _;

use num_complex::Complex64;
use rand::Rng;

use crate::correlation::{negative_lag_correlation, shift_correlation};
use crate::diagnostics::TheoryChecks;
use crate::error::Result;
use crate::gradient::{grad_fd_oracle, grad_fn, lipschitz_bound, GradientMatrix};
use crate::lags::LagSet;
use crate::phase::{phases_to_sequences, PhaseMatrix};
use crate::solver::{solve, Algorithm, SolverConfig};
use crate::state::{seeded_rng, SeedStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VerifySizes {
    /// N ≤ 16.
    #[default]
    Small,
    /// N ≤ 32.
    Medium,
}

impl VerifySizes {
    fn lengths(self) -> &'static [usize] {
        match self {
            VerifySizes::Small => &[4, 8, 16],
            VerifySizes::Medium => &[8, 16, 32],
        }
    }
}

pub type GradientFn = fn(&PhaseMatrix, usize) -> Result<GradientMatrix>;

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    pub sizes: VerifySizes,
    pub seed: u64,
    /// Gradient under test; swapped out by the negative-control tests.
    pub gradient: GradientFn,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            sizes: VerifySizes::Small,
            seed: 0,
            gradient: grad_fn,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub checked: usize,
    pub failed: usize,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub suites: Vec<SuiteResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.suites.iter().all(|s| s.passed)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for s in &self.suites {
            let _ = writeln!(
                out,
                "{:<14} {:<4} {:>4}/{:<4} {}",
                s.name,
                if s.passed { "PASS" } else { "FAIL" },
                s.checked - s.failed,
                s.checked,
                s.detail
            );
        }
        out
    }
}

fn random_shape<R: Rng>(rng: &mut R, lengths: &[usize]) -> (usize, usize) {
    (
        lengths[rng.gen_range(0..lengths.len())],
        rng.gen_range(2..=4),
    )
}

/// Relative error with the scale floored at 1: at lag N−1 every entry of the
/// correlation matrix has unit modulus, the term is constant and both
/// gradients are round-off.
fn rel_frobenius(a: &GradientMatrix, b: &GradientMatrix) -> f64 {
    let diff: f64 = a
        .as_array()
        .iter()
        .zip(b.as_array().iter())
        .map(|(x, y)| (x - y).powi(2))
        .sum();
    diff.sqrt() / b.frobenius().max(1.0)
}

fn gradient_suite(opts: &VerifyOptions) -> Result<SuiteResult> {
    let mut rng = seeded_rng(opts.seed, SeedStream::Verify);
    let samples = 60;
    let mut failed = 0;
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let (n, m) = random_shape(&mut rng, opts.sizes.lengths());
        let phi = PhaseMatrix::random(n, m, &mut rng);
        let lag = rng.gen_range(0..n);
        let err = rel_frobenius(
            &(opts.gradient)(&phi, lag)?,
            &grad_fd_oracle(&phi, lag, 1e-6)?,
        );
        worst = worst.max(err);
        if err.is_nan() || err >= 1e-5 {
            failed += 1;
        }
    }
    Ok(SuiteResult {
        name: "gradient",
        passed: failed == 0,
        checked: samples,
        failed,
        detail: format!("worst relative error {worst:.3e} (limit 1e-5)"),
    })
}

/// Direct sum over time indices counted from 1, for a signed lag.
fn direct_correlation(x: &ndarray::Array2<Complex64>, i: usize, j: usize, lag: isize) -> Complex64 {
    let n_len = x.nrows() as isize;
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 1..=n_len {
        let shifted = k - lag;
        if (1..=n_len).contains(&shifted) {
            acc += x[[(k - 1) as usize, i]].conj() * x[[(shifted - 1) as usize, j]];
        }
    }
    acc
}

fn correlation_suite(opts: &VerifyOptions) -> Result<SuiteResult> {
    let mut rng = seeded_rng(opts.seed.wrapping_add(1), SeedStream::Verify);
    let instances = 50;
    let mut failed = 0;
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let n = rng.gen_range(1..=8);
        let m = rng.gen_range(1..=4);
        let x = phases_to_sequences(&PhaseMatrix::random(n, m, &mut rng));
        let mut err = 0.0f64;
        for lag in 0..n {
            let pos = shift_correlation(&x, lag)?;
            let neg = negative_lag_correlation(&x, lag)?;
            for i in 0..m {
                for j in 0..m {
                    let a = direct_correlation(x.as_array(), i, j, lag as isize);
                    let b = direct_correlation(x.as_array(), i, j, -(lag as isize));
                    err = err
                        .max((pos.values()[[i, j]] - a).norm())
                        .max((neg.values()[[i, j]] - b).norm());
                }
            }
        }
        worst = worst.max(err);
        if err.is_nan() || err > 1e-12 {
            failed += 1;
        }
    }
    Ok(SuiteResult {
        name: "correlation",
        passed: failed == 0,
        checked: instances,
        failed,
        detail: format!("worst entry error {worst:.3e} (limit 1e-12)"),
    })
}

fn diff_ratio(gradient: GradientFn, a: &PhaseMatrix, b: &PhaseMatrix, lag: usize) -> Result<f64> {
    let ga = gradient(a, lag)?;
    let gb = gradient(b, lag)?;
    let num: f64 = ga
        .as_array()
        .iter()
        .zip(gb.as_array().iter())
        .map(|(x, y)| (x - y).powi(2))
        .sum();
    let den: f64 = a
        .as_array()
        .iter()
        .zip(b.as_array().iter())
        .map(|(x, y)| (x - y).powi(2))
        .sum();
    Ok((num / den).sqrt())
}

/// Independent uniform pairs gate the suite; nearby pairs only report the
/// local curvature relative to the bound.
fn lipschitz_suite(opts: &VerifyOptions) -> Result<SuiteResult> {
    let mut rng = seeded_rng(opts.seed.wrapping_add(2), SeedStream::Verify);
    let pairs = 200;
    let mut failed = 0;
    let mut worst = 0.0f64;
    let mut worst_local = 0.0f64;
    for _ in 0..pairs {
        let (n, m) = random_shape(&mut rng, opts.sizes.lengths());
        let l = lipschitz_bound(n, m)?.value();
        let lag = rng.gen_range(0..n);
        let a = PhaseMatrix::random(n, m, &mut rng);
        let b = PhaseMatrix::random(n, m, &mut rng);
        let ratio = diff_ratio(opts.gradient, &a, &b, lag)? / l;
        worst = worst.max(ratio);
        if ratio > 1.0 {
            failed += 1;
        }
        let near = PhaseMatrix::from(a.as_array().mapv(|v| v + rng.gen_range(-1e-3..1e-3)));
        worst_local = worst_local.max(diff_ratio(opts.gradient, &a, &near, lag)? / l);
    }
    Ok(SuiteResult {
        name: "lipschitz",
        passed: failed == 0,
        checked: pairs,
        failed,
        detail: format!(
            "worst ratio/bound {worst:.3} on uniform pairs; {worst_local:.3} on nearby pairs (informational)"
        ),
    })
}

fn theory_suite(opts: &VerifyOptions) -> Result<SuiteResult> {
    let n = opts.sizes.lengths()[1] + 4;
    let t = LagSet::range(0, 3, n)?;
    let mut cfg = SolverConfig::new(n, 2, t, Algorithm::Admm).with_seed(opts.seed);
    cfg.epsilon = f64::MIN_POSITIVE;
    cfg.max_iter = 300;
    cfg.theory_checks = TheoryChecks::Report;
    let out = solve(&cfg)?;
    let r = out.theory;
    let checked = r.monotone_checked + r.sufficient_decrease_checked + r.lower_bound_checked;
    let failed =
        r.monotone_violations + r.sufficient_decrease_violations + r.lower_bound_violations;
    Ok(SuiteResult {
        name: "descent",
        passed: failed == 0 && checked > 0,
        checked,
        failed,
        detail: format!(
            "admm N={n} M=2 lags 0..=3, {} iterations, min augmented Lagrangian {:.6e}",
            out.iterations(),
            r.min_aug_lagrangian
        ),
    })
}

pub fn run_verify(opts: &VerifyOptions) -> Result<VerifyReport> {
    Ok(VerifyReport {
        suites: vec![
            gradient_suite(opts)?,
            correlation_suite(opts)?,
            lipschitz_suite(opts)?,
            theory_suite(opts)?,
        ],
    })
}

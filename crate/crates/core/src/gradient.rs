//! Analytic gradient of the per-lag objective terms, a central-difference
//! oracle, and the Lipschitz constant used for step sizes.
//!
//! With `E = R_n − N·I·δ_n`, only row `m` and column `m` of `R_n` depend on
//! `φ_{i,m}`, which gives
//!
//! ```text
//! ∂f_n/∂φ_{i,m} = 2·Im( conj(x_{i,m}) · ( Σ_b conj(E_{m,b}) x_{i−n,b}
//!                                       + Σ_a E_{a,m} x_{i+n,a} ) )
//! ```
//!
//! where out-of-range time indices drop their sum. One lag costs O(M²N).

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64;
use serde::Serialize;

use crate::correlation::correlate;
use crate::error::{Error, Result};
use crate::lags::LagSet;
use crate::metrics::{deviation_norm_sq, objective_fn};
use crate::phase::{phases_to_sequences, PhaseMatrix};

/// `∂f/∂φ_{i,m}` laid out like the phase matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientMatrix(Array2<f64>);

impl GradientMatrix {
    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_array(self) -> Array2<f64> {
        self.0
    }

    pub fn frobenius(&self) -> f64 {
        frobenius(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct LipschitzConstant(f64);

impl LipschitzConstant {
    pub fn value(self) -> f64 {
        self.0
    }
}

pub(crate) fn frobenius(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn require_multi(m_count: usize) -> Result<()> {
    if m_count < 2 {
        return Err(Error::DegenerateModel(format!(
            "at least two sequences are required, got M = {m_count}"
        )));
    }
    Ok(())
}

/// `4(M−1)(N+1)`, shared by every lag.
pub fn lipschitz_bound(n_len: usize, m_count: usize) -> Result<LipschitzConstant> {
    require_multi(m_count)?;
    if n_len == 0 {
        return Err(Error::InvalidInput(
            "sequence length must be positive".into(),
        ));
    }
    Ok(LipschitzConstant(
        4.0 * (m_count as f64 - 1.0) * (n_len as f64 + 1.0),
    ))
}

/// Writes `∇f_n` into `out` and returns `f_n`. Callers validate the lag.
pub(crate) fn value_and_grad_into(
    x: ArrayView2<'_, Complex64>,
    lag: usize,
    out: &mut Array2<f64>,
) -> f64 {
    let (n_len, m_count) = x.dim();
    let mut e = correlate(x, lag);
    let value = deviation_norm_sq(&e, lag, n_len);
    if lag == 0 {
        for a in 0..m_count {
            e[[a, a]].re -= n_len as f64;
        }
    }
    // Row sums use conj(E), column sums use E; keep both contiguous.
    let e_conj = e.mapv(|z| z.conj());
    let e_t = e.t().to_owned();

    for i in 0..n_len {
        let xi = x.row(i);
        let before = (i >= lag).then(|| x.row(i - lag));
        let after = (i + lag < n_len).then(|| x.row(i + lag));
        for m in 0..m_count {
            let mut s = Complex64::new(0.0, 0.0);
            if let Some(prev) = &before {
                for (ec, &xb) in e_conj.row(m).iter().zip(prev.iter()) {
                    s += ec * xb;
                }
            }
            if let Some(next) = &after {
                for (ea, &xa) in e_t.row(m).iter().zip(next.iter()) {
                    s += ea * xa;
                }
            }
            out[[i, m]] = 2.0 * (xi[m].conj() * s).im;
        }
    }
    value
}

pub fn grad_fn(phi: &PhaseMatrix, lag: usize) -> Result<GradientMatrix> {
    require_multi(phi.m_count())?;
    if lag >= phi.n_len() {
        return Err(Error::InvalidLag {
            lag,
            n_len: phi.n_len(),
        });
    }
    let x = phases_to_sequences(phi);
    let mut out = Array2::zeros(phi.dim());
    value_and_grad_into(x.as_array().view(), lag, &mut out);
    Ok(GradientMatrix(out))
}

/// Sum of `∇f_n` over the lag set.
pub fn grad_total(phi: &PhaseMatrix, t: &LagSet) -> Result<GradientMatrix> {
    require_multi(phi.m_count())?;
    crate::metrics::check_lags_for(t, phi.n_len())?;
    let x = phases_to_sequences(phi);
    let mut acc = Array2::zeros(phi.dim());
    let mut g = Array2::zeros(phi.dim());
    for n in t.iter() {
        value_and_grad_into(x.as_array().view(), n, &mut g);
        acc += &g;
    }
    Ok(GradientMatrix(acc))
}

/// Central differences of `f_n` using only the objective evaluation.
pub fn grad_fd_oracle(phi: &PhaseMatrix, lag: usize, h: f64) -> Result<GradientMatrix> {
    if !(1e-8..=1e-3).contains(&h) {
        return Err(Error::InvalidInput(format!(
            "finite-difference step {h} outside [1e-8, 1e-3]"
        )));
    }
    let t = LagSet::new(vec![lag], phi.n_len())?;
    let mut out = Array2::zeros(phi.dim());
    let mut probe = phi.clone();
    for ((i, m), slot) in out.indexed_iter_mut() {
        let base = phi.as_array()[[i, m]];
        probe.as_array_mut()[[i, m]] = base + h;
        let up = objective_fn(&probe, lag, &t)?.value();
        probe.as_array_mut()[[i, m]] = base - h;
        let down = objective_fn(&probe, lag, &t)?.value();
        probe.as_array_mut()[[i, m]] = base;
        *slot = (up - down) / (2.0 * h);
    }
    Ok(GradientMatrix(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_phi(seed: u64, n: usize, m: usize) -> PhaseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PhaseMatrix::random(n, m, &mut rng)
    }

    fn rel_err(a: &GradientMatrix, b: &GradientMatrix) -> f64 {
        frobenius(&(a.as_array() - b.as_array())) / b.frobenius().max(1e-300)
    }

    #[test]
    fn lipschitz_examples() {
        assert_eq!(lipschitz_bound(256, 3).unwrap().value(), 2056.0);
        assert_eq!(lipschitz_bound(2, 2).unwrap().value(), 12.0);
        assert_eq!(lipschitz_bound(2048, 32).unwrap().value(), 254076.0);
        assert!(matches!(
            lipschitz_bound(8, 1),
            Err(Error::DegenerateModel(_))
        ));
    }

    #[test]
    fn single_sequence_is_degenerate() {
        let phi = PhaseMatrix::zeros(4, 1);
        assert!(matches!(grad_fn(&phi, 0), Err(Error::DegenerateModel(_))));
        assert!(grad_fn(&PhaseMatrix::zeros(4, 2), 4).is_err());
    }

    #[test]
    fn matches_finite_differences_seed13() {
        let phi = random_phi(13, 8, 3);
        for n in 0..3 {
            let g = grad_fn(&phi, n).unwrap();
            let fd = grad_fd_oracle(&phi, n, 1e-6).unwrap();
            assert!(rel_err(&g, &fd) < 1e-5, "lag {n}: {}", rel_err(&g, &fd));
        }
    }

    #[test]
    fn equal_columns_give_opposite_gradient_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let col = PhaseMatrix::random(6, 1, &mut rng);
        let mut a = Array2::zeros((6, 2));
        a.column_mut(0).assign(&col.as_array().column(0));
        a.column_mut(1).assign(&col.as_array().column(0));
        // Break exact symmetry slightly so the gradient is nonzero.
        a[[2, 1]] += 0.3;
        let g = grad_fn(&PhaseMatrix::from(a.clone()), 0).unwrap();
        let swapped = {
            let mut s = a.clone();
            s.column_mut(0).assign(&a.column(1));
            s.column_mut(1).assign(&a.column(0));
            s
        };
        let gs = grad_fn(&PhaseMatrix::from(swapped), 0).unwrap();
        // Swapping columns swaps gradient columns.
        for i in 0..6 {
            assert!((g.as_array()[[i, 0]] - gs.as_array()[[i, 1]]).abs() < 1e-10);
        }
        // At exactly equal columns the two gradient columns are negatives.
        let g_eq = grad_fn(
            &PhaseMatrix::from({
                let mut e = a.clone();
                e[[2, 1]] -= 0.3;
                e
            }),
            0,
        )
        .unwrap();
        for i in 0..6 {
            assert!((g_eq.as_array()[[i, 0]] + g_eq.as_array()[[i, 1]]).abs() < 1e-10);
        }
    }

    #[test]
    fn column_sums_vanish() {
        let phi = random_phi(31, 12, 4);
        for n in [0, 1, 5, 11] {
            let g = grad_fn(&phi, n).unwrap();
            let scale = g.frobenius().max(1.0);
            for col in g.as_array().columns() {
                assert!(col.sum().abs() < 1e-8 * scale);
            }
        }
    }

    #[test]
    fn oracle_single_sequence_zero_lag() {
        let phi = random_phi(4, 6, 1);
        let fd = grad_fd_oracle(&phi, 0, 1e-5).unwrap();
        assert!(fd.as_array().iter().all(|v| v.abs() < 1e-6));
        assert!(grad_fd_oracle(&phi, 0, 1e-2).is_err());
    }

    #[test]
    fn oracle_error_is_second_order() {
        let phi = random_phi(13, 8, 3);
        let g = grad_fn(&phi, 1).unwrap();
        let e1 = rel_err(&grad_fd_oracle(&phi, 1, 1e-3).unwrap(), &g);
        let e2 = rel_err(&grad_fd_oracle(&phi, 1, 5e-4).unwrap(), &g);
        let ratio = e1 / e2;
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn descent_step_respects_quadratic_bound() {
        let t_all = |n| LagSet::new(vec![n], 10).unwrap();
        for seed in 0..20 {
            let phi = random_phi(seed, 10, 3);
            let l = lipschitz_bound(10, 3).unwrap().value();
            let eta = 1.0 / (2.0 * l);
            for n in [0, 2, 7] {
                let g = grad_fn(&phi, n).unwrap();
                let stepped = PhaseMatrix::from(phi.as_array() - &(g.as_array() * eta));
                let f0 = objective_fn(&phi, n, &t_all(n)).unwrap().value();
                let f1 = objective_fn(&stepped, n, &t_all(n)).unwrap().value();
                let gn2 = g.frobenius().powi(2);
                assert!(f1 - f0 <= l * eta * eta * gn2 / 2.0 + 1e-9 * f0.max(1.0));
            }
        }
    }

    #[test]
    fn total_gradient_sums_terms() {
        let phi = random_phi(2, 9, 2);
        let t = LagSet::new(vec![0, 3], 9).unwrap();
        let total = grad_total(&phi, &t).unwrap();
        let sum = grad_fn(&phi, 0).unwrap().into_array() + grad_fn(&phi, 3).unwrap().as_array();
        assert!(frobenius(&(total.as_array() - &sum)) < 1e-12);
    }
}

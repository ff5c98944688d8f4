//! `exp(tG)` for generator matrices by uniformization.

use std::hash::Hash;

use crate::matrix::{DenseMatrix, StateMatrix};
use crate::scalar::Real;

/// Poisson tail mass at which the uniformization series is cut.
pub const POISSON_TAIL: f64 = 1e-12;

/// Largest `lambda * t` handled in one uniformization pass; longer horizons are
/// split into `2^s` equal pieces and squared back.
const MAX_UNIFORM_HORIZON: f64 = 20.0;

/// `exp(tG) = sum_k Pois(k; lambda t) (I + G / lambda)^k` with `lambda = max_i |g_ii|`.
pub fn expm_generator<F: Real>(g: &DenseMatrix<F>, t: F) -> DenseMatrix<F> {
    assert_eq!(g.rows(), g.cols(), "generator must be square");
    let n = g.rows();
    let lambda = (0..n).map(|i| g.get(i, i).abs()).fold(F::zero(), F::max);
    if lambda == F::zero() || t == F::zero() {
        return DenseMatrix::identity(n);
    }
    let horizon = (lambda * t).to_f64().unwrap_or(f64::INFINITY);
    let mut squarings = 0u32;
    let mut piece = horizon;
    while piece > MAX_UNIFORM_HORIZON {
        piece /= 2.0;
        squarings += 1;
    }
    let tau = t / F::from_count(1u64 << squarings);
    let mut result = uniformized(g, lambda, tau);
    for _ in 0..squarings {
        result = result.matmul(&result);
    }
    result
}

fn uniformized<F: Real>(g: &DenseMatrix<F>, lambda: F, tau: F) -> DenseMatrix<F> {
    let n = g.rows();
    let step = DenseMatrix::identity(n).add(&g.scale(&(F::one() / lambda)));
    let mu = lambda * tau;
    let tail = F::from_f64(POISSON_TAIL).expect("finite");
    let mut weight = (-mu).exp();
    let mut cumulative = weight;
    let mut power = DenseMatrix::identity(n);
    let mut acc = power.scale(&weight);
    let mut k = 0u64;
    while F::one() - cumulative > tail && k < 10_000 {
        k += 1;
        power = power.matmul(&step);
        weight = weight * mu / F::from_count(k);
        cumulative = cumulative + weight;
        acc = acc.add(&power.scale(&weight));
    }
    acc
}

/// [`expm_generator`] on a state-indexed matrix.
pub fn matrix_exponential<S, F>(g: &StateMatrix<S, F>, t: F) -> StateMatrix<S, F>
where
    S: Clone + Eq + Hash,
    F: Real,
{
    StateMatrix::new(g.space().clone(), expm_generator(g.values(), t))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_cases() {
        let g = DenseMatrix::from_rows(vec![vec![-1.0, 1.0], vec![0.0, 0.0]]);
        assert_eq!(expm_generator(&g, 0.0), DenseMatrix::identity(2));
        let one = DenseMatrix::from_rows(vec![vec![0.0]]);
        assert_eq!(expm_generator(&one, 3.0), DenseMatrix::identity(1));
    }

    #[test]
    fn pure_death() {
        let g = DenseMatrix::from_rows(vec![vec![-1.0, 1.0], vec![0.0, 0.0]]);
        let p = expm_generator(&g, 1.0);
        assert!((p.get(0, 0) - (-1.0f64).exp()).abs() < 1e-12);
        let long = expm_generator(&g, 50.0);
        assert!((long.get(0, 0) - (-50.0f64).exp()).abs() < 1e-12);
        assert!((long.get(0, 1) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn semigroup_and_stochasticity() {
        let g = DenseMatrix::from_rows(vec![vec![-3.0, 2.0, 1.0], vec![0.5, -0.5, 0.0], vec![4.0, 1.0, -5.0]]);
        let (s, t) = (0.7f64, 1.9);
        let lhs = expm_generator(&g, s + t);
        let rhs = expm_generator(&g, s).matmul(&expm_generator(&g, t));
        assert!(lhs.max_abs_diff(&rhs) < 1e-8);
        for r in lhs.row_sums() {
            assert!((r - 1.0).abs() < 1e-9);
        }
        // Agreement with a long Euler product (I + G/m)^m.
        let m = 1u64 << 20;
        let euler = DenseMatrix::identity(3).add(&g.scale(&(2.6 / m as f64))).pow(m);
        assert!(lhs.max_abs_diff(&euler) < 1e-4);
    }
}

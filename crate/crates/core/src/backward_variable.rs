//! Backward matrices of the variable-size model over
//! `S_N = {i in N_0^K : |i| <= N}`. `P = P^mut P^rep` need not be stochastic, so
//! row sums are returned alongside the matrices.

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;

use crate::combinatorics::{bounded_simplex_points, for_each_contingency_table, for_each_positive_composition};
use crate::error::{Error, Result};
use crate::forward_variable::{TypeCounts, VariableModel};
use crate::matrix::{DenseMatrix, StateMatrix, StateSpace};
use crate::scalar::{exact_binomial, factorial, pow, Scalar};

#[derive(Clone, Debug)]
pub struct BackwardMatrices<T> {
    pub p_mut: StateMatrix<TypeCounts, T>,
    pub p_rep: StateMatrix<TypeCounts, T>,
    pub p: StateMatrix<TypeCounts, T>,
    /// Row sums of `p`.
    pub row_sums: Vec<T>,
}

/// `Phi` values keyed on sorted arguments (`Phi` is symmetric).
type PhiCache<T> = HashMap<Vec<u64>, T>;

impl<T: Scalar> VariableModel<T> {
    fn check_backward_state(&self, i: &[u64]) -> Result<()> {
        if i.len() != self.types() || i.iter().sum::<u64>() > self.size() {
            return Err(Error::domain(format!(
                "{:?} is not a state with {} types and at most {} individuals",
                i,
                self.types(),
                self.size()
            )));
        }
        Ok(())
    }

    /// `S_N` in lexicographic order, bounded by `cap` states.
    pub fn backward_state_space(&self, cap: usize) -> Result<Arc<StateSpace<TypeCounts>>> {
        let k = self.types() as u64;
        let n = self.size();
        let size = exact_binomial(n + k, n);
        if size > cap as u128 {
            return Err(Error::Size { size, cap });
        }
        Ok(Arc::new(StateSpace::new(
            bounded_simplex_points(n, self.types())
                .into_iter()
                .map(TypeCounts::new)
                .collect(),
        )))
    }

    /// Probability that a sample with `i_k` individuals of type `k` (before
    /// mutation) has exactly `j_k` parents of type `k`.
    pub fn p_rep_backward(&self, i: &[u64], j: &[u64]) -> Result<T> {
        self.p_rep_cached(i, j, &mut PhiCache::new())
    }

    fn p_rep_cached(&self, i: &[u64], j: &[u64], cache: &mut PhiCache<T>) -> Result<T> {
        self.check_backward_state(i)?;
        self.check_backward_state(j)?;
        if i.iter().zip(j).any(|(&a, &b)| b > a || (a > 0 && b == 0)) {
            return Ok(T::zero());
        }
        // Positive compositions of each i_k into j_k parts, concatenated.
        let mut blocks: Vec<Vec<Vec<u64>>> = Vec::new();
        for (&a, &b) in i.iter().zip(j) {
            let mut parts = Vec::new();
            if b > 0 {
                for_each_positive_composition(a, b as usize, |m| parts.push(m.to_vec()));
            } else {
                parts.push(Vec::new());
            }
            blocks.push(parts);
        }
        let mut terms = Vec::new();
        let mut m = Vec::new();
        self.composition_terms(&blocks, 0, &mut m, cache, &mut terms)?;
        let mut scale = T::one();
        for (&a, &b) in i.iter().zip(j) {
            scale = scale * factorial::<T>(a) / factorial::<T>(b);
        }
        Ok(scale * T::sum_all(terms))
    }

    fn composition_terms(
        &self,
        blocks: &[Vec<Vec<u64>>],
        level: usize,
        m: &mut Vec<u64>,
        cache: &mut PhiCache<T>,
        terms: &mut Vec<T>,
    ) -> Result<()> {
        if level == blocks.len() {
            let mut key = m.clone();
            key.sort_unstable_by(|a, b| b.cmp(a));
            let phi = match cache.get(&key) {
                Some(v) => v.clone(),
                None => {
                    let v = self.law().phi(&key)?;
                    cache.insert(key, v.clone());
                    v
                }
            };
            let mut denom = T::one();
            for &x in m.iter() {
                denom = denom * factorial::<T>(x);
            }
            terms.push(phi / denom);
            return Ok(());
        }
        for part in &blocks[level] {
            let len = m.len();
            m.extend_from_slice(part);
            self.composition_terms(blocks, level + 1, m, cache, terms)?;
            m.truncate(len);
        }
        Ok(())
    }

    /// `sum_M prod_k i_k! prod_l u_lk^m_kl / m_kl!` over non-negative matrices with
    /// row sums `i` and column sums `j`. Uses the transpose of `U`.
    pub fn p_mut_backward(&self, i: &[u64], j: &[u64]) -> T {
        let k_types = self.types();
        if i.len() != k_types || j.len() != k_types || i.iter().sum::<u64>() != j.iter().sum::<u64>() {
            return T::zero();
        }
        let mut terms = Vec::new();
        for_each_contingency_table(i, j, |m| {
            let mut term = T::one();
            for k in 0..k_types {
                term = term * factorial::<T>(i[k]);
                for l in 0..k_types {
                    let x = m[k * k_types + l];
                    term = term * pow(self.mutation().get(l, k), x) / factorial::<T>(x);
                }
            }
            terms.push(term);
        });
        T::sum_all(terms)
    }

    /// `P^mut`, `P^rep` and `P = P^mut P^rep` over `S_N`, with the row sums of `P`.
    pub fn backward_matrices(&self, cap: usize) -> Result<BackwardMatrices<T>> {
        let space = self.backward_state_space(cap)?;
        let len = space.len();
        let rep_rows: Vec<Result<Vec<T>>> = (0..len)
            .into_par_iter()
            .map(|a| {
                let mut cache = PhiCache::new();
                let i = space.state(a).counts();
                space
                    .states()
                    .iter()
                    .map(|j| self.p_rep_cached(i, j.counts(), &mut cache))
                    .collect()
            })
            .collect();
        let rep_rows = rep_rows.into_iter().collect::<Result<Vec<_>>>()?;
        let p_rep = StateMatrix::new(Arc::clone(&space), DenseMatrix::from_rows(rep_rows));
        let mut_values = DenseMatrix::from_row_fn(len, len, |a| {
            let i = space.state(a).counts();
            space
                .states()
                .iter()
                .map(|j| self.p_mut_backward(i, j.counts()))
                .collect()
        });
        let p_mut = StateMatrix::new(Arc::clone(&space), mut_values);
        let p = p_mut.matmul(&p_rep)?;
        let row_sums = p.row_sums();
        Ok(BackwardMatrices {
            p_mut,
            p_rep,
            p,
            row_sums,
        })
    }
}

//! Generators of the limiting multi-type coalescent over typed partitions, the
//! discrete-time limit matrices and the block-counting generator.

use std::sync::Arc;

use rayon::prelude::*;

use super::xi::XiMeasure;
use crate::combinatorics::{bounded_simplex_points, for_each_positive_composition};
use crate::error::{Error, Result};
use crate::forward_variable::TypeCounts;
use crate::matrix::{DenseMatrix, StateMatrix, StateSpace};
use crate::partition::TypedPartition;
use crate::scalar::{factorial, pow, Real};

/// Parameters of a multi-type Xi-coalescent with mutation: per-type measures
/// `Xi_k`, calibration constants `d_k` and backward mutation rates `rho_kl`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoalescentSpec<F = f64> {
    xi: Vec<XiMeasure<F>>,
    d: Vec<F>,
    rho: Vec<Vec<F>>,
}

impl<F: Real> CoalescentSpec<F> {
    /// `rho[k][l]` for `k != l`; diagonal entries are ignored.
    pub fn new(xi: Vec<XiMeasure<F>>, d: Vec<F>, rho: Vec<Vec<F>>) -> Result<Self> {
        let k = xi.len();
        if k == 0 {
            return Err(Error::invalid("limit", "at least one type is required"));
        }
        if d.len() != k {
            return Err(Error::invalid("limit.d", format!("expected {k} entries")));
        }
        if let Some(t) = d.iter().position(|&v| !(v.is_finite() && v >= F::zero())) {
            return Err(Error::invalid(
                "limit.d",
                format!("entry {t} must be finite and non-negative"),
            ));
        }
        if rho.len() != k || rho.iter().any(|r| r.len() != k) {
            return Err(Error::invalid("limit.rho", format!("expected a {k} x {k} table")));
        }
        let mut rho = rho;
        for (a, row) in rho.iter_mut().enumerate() {
            for (b, v) in row.iter_mut().enumerate() {
                if a == b {
                    *v = F::zero();
                } else if !(v.is_finite() && *v >= F::zero()) {
                    return Err(Error::invalid(
                        "limit.rho",
                        format!("entry ({a}, {b}) must be finite and non-negative"),
                    ));
                }
            }
        }
        Ok(CoalescentSpec { xi, d, rho })
    }

    /// Structured Kingman coalescent: pair mergers at rate `d_k`, migration `rho_kl`.
    pub fn structured_kingman(d: Vec<F>, rho: Vec<Vec<F>>) -> Result<Self> {
        let xi = vec![XiMeasure::kingman(F::one())?; d.len()];
        Self::new(xi, d, rho)
    }

    pub fn types(&self) -> usize {
        self.xi.len()
    }

    pub fn xi(&self, k: usize) -> &XiMeasure<F> {
        &self.xi[k]
    }

    pub fn d(&self, k: usize) -> F {
        self.d[k]
    }

    pub fn rho(&self, k: usize, l: usize) -> F {
        self.rho[k][l]
    }

    /// Total mutation rate `rho_k` out of type `k`.
    pub fn rho_total(&self, k: usize) -> F {
        F::sum_all(self.rho[k].iter().copied())
    }

    /// `d_k phi^{(k)}_j(counts)`, with the convention `phi_0() = 0`.
    fn scaled_rate(&self, k: usize, counts: &[u64]) -> Result<F> {
        if counts.is_empty() || self.d[k] == F::zero() {
            return Ok(F::zero());
        }
        Ok(self.d[k] * self.xi[k].rate_extended(counts)?)
    }

    /// Reproduction generator over `space`.
    pub fn q_rep(&self, space: &Arc<StateSpace<TypedPartition>>) -> Result<StateMatrix<TypedPartition, F>> {
        self.generator(space, |from, to| self.q_rep_offdiag(from, to))
    }

    /// Mutation generator over `space`.
    pub fn q_mut(&self, space: &Arc<StateSpace<TypedPartition>>) -> Result<StateMatrix<TypedPartition, F>> {
        self.generator(space, |from, to| Ok(self.q_mut_offdiag(from, to)))
    }

    /// `Q = Q^rep + Q^mut`.
    pub fn q(&self, space: &Arc<StateSpace<TypedPartition>>) -> Result<StateMatrix<TypedPartition, F>> {
        self.q_rep(space)?.add(&self.q_mut(space)?)
    }

    fn q_rep_offdiag(&self, from: &TypedPartition, to: &TypedPartition) -> Result<F> {
        let Some(groups) = from.merge_groups(to, self.types()) else {
            return Ok(F::zero());
        };
        let merging: Vec<usize> = (0..self.types())
            .filter(|&k| groups[k].iter().any(|&g| g > 1))
            .collect();
        match merging.as_slice() {
            [k] => self.scaled_rate(*k, &groups[*k]),
            _ => Ok(F::zero()),
        }
    }

    fn q_mut_offdiag(&self, from: &TypedPartition, to: &TypedPartition) -> F {
        if from.n() != to.n() || from.num_blocks() != to.num_blocks() {
            return F::zero();
        }
        let mut changed = None;
        for (&(a, k), &(b, l)) in from.blocks().iter().zip(to.blocks()) {
            if a != b {
                return F::zero();
            }
            if k != l {
                if changed.is_some() {
                    return F::zero();
                }
                changed = Some((k, l));
            }
        }
        changed.map_or(F::zero(), |(k, l)| self.rho[k][l])
    }

    fn generator<S, G>(&self, space: &Arc<StateSpace<S>>, offdiag: G) -> Result<StateMatrix<S, F>>
    where
        S: Clone + Eq + std::hash::Hash + Send + Sync,
        G: Fn(&S, &S) -> Result<F> + Sync + Send,
    {
        let len = space.len();
        let rows: Vec<Result<Vec<F>>> = (0..len)
            .into_par_iter()
            .map(|i| {
                let from = space.state(i);
                let mut row = Vec::with_capacity(len);
                for (j, to) in space.states().iter().enumerate() {
                    row.push(if i == j { F::zero() } else { offdiag(from, to)? });
                }
                row[i] = -F::sum_all(row.iter().copied());
                Ok(row)
            })
            .collect();
        let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
        Ok(StateMatrix::new(Arc::clone(space), DenseMatrix::from_rows(rows)))
    }

    /// Limit matrices `(A^mut, A^rep, A = A^mut A^rep)` when `c_N -> c > 0`.
    ///
    /// Off-diagonal entries follow the product formulas. A block that keeps its
    /// type contributes `1 - c rho_k`; a type without mergers contributes
    /// `1 + c d_k phi_{i_k}(1..1)`. The diagonal of `A^rep` is the row remainder.
    pub fn discrete_limit_matrices(&self, c: F, space: &Arc<StateSpace<TypedPartition>>) -> Result<DiscreteLimit<F>> {
        if !(c.is_finite() && c > F::zero()) {
            return Err(Error::domain("the limit constant c must be positive"));
        }
        let k_types = self.types();
        for k in 0..k_types {
            if c * self.rho_total(k) > F::one() {
                return Err(Error::domain(format!(
                    "c * rho_{k} exceeds one; no stochastic mutation matrix exists"
                )));
            }
        }
        let a_mut = self.dense(space, |from, to| {
            let Some(table) = from.retyping(to, k_types) else {
                return Ok(F::zero());
            };
            let mut acc = F::one();
            for (k, row) in table.iter().enumerate() {
                for (l, &moves) in row.iter().enumerate() {
                    let p = if k == l {
                        F::one() - c * self.rho_total(k)
                    } else {
                        c * self.rho[k][l]
                    };
                    acc = acc * pow(&p, moves);
                }
            }
            Ok(acc)
        })?;
        let a_rep = self.dense(space, |from, to| {
            if from == to {
                return Ok(F::zero());
            }
            let Some(groups) = from.merge_groups(to, k_types) else {
                return Ok(F::zero());
            };
            let mut acc = F::one();
            for (k, g) in groups.iter().enumerate() {
                let factor = if g.iter().any(|&x| x > 1) {
                    c * self.scaled_rate(k, g)?
                } else {
                    F::one() + c * self.scaled_rate(k, g)?
                };
                acc = acc * factor;
            }
            Ok(acc)
        })?;
        let mut rep_values = a_rep.into_values();
        for i in 0..space.len() {
            let off = F::sum_all(rep_values.row(i).iter().copied());
            let stay = F::one() - off;
            if stay < -F::from_f64(1e-12).expect("finite") || rep_values.row(i).iter().any(|&v| v < F::zero()) {
                return Err(Error::domain(format!(
                    "c = {:?} gives an invalid reproduction row for {}",
                    c,
                    space.state(i)
                )));
            }
            rep_values.set(i, i, stay.max(F::zero()));
        }
        let a_rep = StateMatrix::new(Arc::clone(space), rep_values);
        let a = a_mut.matmul(&a_rep)?;
        Ok(DiscreteLimit { a_mut, a_rep, a })
    }

    fn dense<G>(&self, space: &Arc<StateSpace<TypedPartition>>, entry: G) -> Result<StateMatrix<TypedPartition, F>>
    where
        G: Fn(&TypedPartition, &TypedPartition) -> Result<F> + Sync + Send,
    {
        let rows: Vec<Result<Vec<F>>> = (0..space.len())
            .into_par_iter()
            .map(|i| {
                let from = space.state(i);
                space.states().iter().map(|to| entry(from, to)).collect()
            })
            .collect();
        let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
        Ok(StateMatrix::new(Arc::clone(space), DenseMatrix::from_rows(rows)))
    }

    /// Block-counting states `i` with `1 <= |i| <= cap`, lexicographic order.
    pub fn block_counting_space(&self, cap: u64) -> Result<Arc<StateSpace<TypeCounts>>> {
        if cap == 0 {
            return Err(Error::invalid("cap", "block cap must be at least 1"));
        }
        let states = bounded_simplex_points(cap, self.types())
            .into_iter()
            .filter(|s| s.iter().sum::<u64>() > 0)
            .map(TypeCounts::new)
            .collect();
        Ok(Arc::new(StateSpace::new(states)))
    }

    /// Rate `g_ij` of the block-counting process for `i != j`.
    pub fn block_counting_rate(&self, i: &[u64], j: &[u64]) -> Result<F> {
        let k_types = self.types();
        let diff: Vec<i64> = i.iter().zip(j).map(|(&a, &b)| a as i64 - b as i64).collect();
        let down: Vec<usize> = (0..k_types).filter(|&k| diff[k] > 0).collect();
        let up: Vec<usize> = (0..k_types).filter(|&k| diff[k] < 0).collect();
        // Mutation: j = i - e_k + e_l.
        if let ([k], [l]) = (down.as_slice(), up.as_slice()) {
            if diff[*k] == 1 && diff[*l] == -1 {
                return Ok(F::from_count(i[*k]) * self.rho[*k][*l]);
            }
            return Ok(F::zero());
        }
        // Reproduction: exactly one type loses blocks, none gain.
        let ([k], []) = (down.as_slice(), up.as_slice()) else {
            return Ok(F::zero());
        };
        let (ik, jk) = (i[*k], j[*k]);
        if jk == 0 || self.d[*k] == F::zero() {
            return Ok(F::zero());
        }
        let mut sum = F::zero();
        let mut err = None;
        for_each_positive_composition(ik, jk as usize, |m| {
            if err.is_some() {
                return;
            }
            match self.xi[*k].rate_extended(m) {
                Ok(r) => {
                    let mut denom = F::one();
                    for &p in m {
                        denom = denom * factorial::<F>(p);
                    }
                    sum = sum + r / denom;
                }
                Err(e) => err = Some(e),
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        Ok(self.d[*k] * factorial::<F>(ik) / factorial::<F>(jk) * sum)
    }

    /// Diagonal `sum_k d_k phi_{i_k}(1..1) - sum_k i_k rho_k`.
    pub fn block_counting_diagonal(&self, i: &[u64]) -> Result<F> {
        let mut acc = F::zero();
        for (k, &ik) in i.iter().enumerate() {
            acc = acc + self.scaled_rate(k, &vec![1; ik as usize])? - F::from_count(ik) * self.rho_total(k);
        }
        Ok(acc)
    }

    /// `G = G^rep + G^mut` on `{i : 1 <= |i| <= cap}`. The set is closed under
    /// the dynamics, since mergers lower and mutations preserve the block total.
    pub fn block_counting_generator(&self, cap: u64) -> Result<StateMatrix<TypeCounts, F>> {
        let space = self.block_counting_space(cap)?;
        let rows: Vec<Result<Vec<F>>> = (0..space.len())
            .into_par_iter()
            .map(|a| {
                let i = space.state(a).counts();
                space
                    .states()
                    .iter()
                    .enumerate()
                    .map(|(b, j)| {
                        if a == b {
                            self.block_counting_diagonal(i)
                        } else {
                            self.block_counting_rate(i, j.counts())
                        }
                    })
                    .collect()
            })
            .collect();
        let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
        Ok(StateMatrix::new(space, DenseMatrix::from_rows(rows)))
    }
}

/// The limit matrices of the discrete-time regime.
#[derive(Clone, Debug)]
pub struct DiscreteLimit<F> {
    pub a_mut: StateMatrix<TypedPartition, F>,
    pub a_rep: StateMatrix<TypedPartition, F>,
    pub a: StateMatrix<TypedPartition, F>,
}

/// Image of a generator over typed partitions under the block-counting map:
/// entry `(f(pi), j)` is `sum over pi' with f(pi') = j of q(pi, pi')`, taken from
/// the first state of each class.
pub fn lump_to_counts<F: Real>(
    q: &StateMatrix<TypedPartition, F>,
    counts: &Arc<StateSpace<TypeCounts>>,
    types: usize,
) -> Result<DenseMatrix<F>> {
    let mut out = DenseMatrix::zeros(counts.len(), counts.len());
    let mut filled = vec![false; counts.len()];
    let space = q.space();
    let index: Vec<usize> = space
        .states()
        .iter()
        .map(|s| {
            counts
                .index_of(&TypeCounts::new(s.counts_by_type(types)))
                .ok_or_else(|| Error::StateSpaceMismatch(format!("no block-count state for {s}")))
        })
        .collect::<Result<_>>()?;
    for (a, &ia) in index.iter().enumerate() {
        if filled[ia] {
            continue;
        }
        filled[ia] = true;
        for (b, &ib) in index.iter().enumerate() {
            let v = *out.get(ia, ib) + *q.values().get(a, b);
            out.set(ia, ib, v);
        }
    }
    Ok(out)
}

//! The model with fixed subpopulation sizes, backward in time: exact one-generation
//! transition matrices over typed partitions and simulation of the ancestral chain.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, StateMatrix, StateSpace};
use crate::mutation::MutationCountTable;
use crate::offspring::OffspringLaw;
use crate::partition::{enumerate_typed_partitions, TypedPartition};
use crate::scalar::{falling, Scalar};

/// Row sums of exact transition matrices are checked to this tolerance.
pub const STOCHASTIC_TOL: f64 = 1e-10;

/// Subpopulation `k` of size `N_k` reproduces by its own exchangeable law; a fixed
/// number `N_kl` of its children then mutate to type `l`.
#[derive(Clone, Debug)]
pub struct FixedModel<T = f64> {
    laws: Vec<OffspringLaw<T>>,
    mutation: MutationCountTable,
}

/// `P^mut`, `P^rep` and `P = P^mut P^rep` on a common state space.
#[derive(Clone, Debug)]
pub struct FixedMatrices<T> {
    pub p_mut: StateMatrix<TypedPartition, T>,
    pub p_rep: StateMatrix<TypedPartition, T>,
    pub p: StateMatrix<TypedPartition, T>,
}

impl<T: Scalar> FixedModel<T> {
    pub fn new(laws: Vec<OffspringLaw<T>>, mutation: MutationCountTable) -> Result<Self> {
        if laws.len() != mutation.types() {
            return Err(Error::invalid(
                "offspring",
                format!("{} laws for {} types", laws.len(), mutation.types()),
            ));
        }
        for (k, law) in laws.iter().enumerate() {
            if law.size() != mutation.size(k) {
                return Err(Error::invalid(
                    "offspring",
                    format!(
                        "law for type {k} has N = {}, subpopulation size is {}",
                        law.size(),
                        mutation.size(k)
                    ),
                ));
            }
        }
        Ok(FixedModel { laws, mutation })
    }

    pub fn types(&self) -> usize {
        self.laws.len()
    }

    pub fn laws(&self) -> &[OffspringLaw<T>] {
        &self.laws
    }

    pub fn mutation(&self) -> &MutationCountTable {
        &self.mutation
    }

    /// `N = min_k N_k`.
    pub fn min_size(&self) -> u64 {
        self.mutation.sizes().iter().copied().min().unwrap_or(0)
    }

    fn check_state(&self, state: &TypedPartition) -> Result<()> {
        if state.max_type().is_some_and(|k| k >= self.types()) {
            return Err(Error::domain(format!("state {state} uses an unknown type")));
        }
        for (k, &c) in state.counts_by_type(self.types()).iter().enumerate() {
            if c > self.mutation.size(k) {
                return Err(Error::domain(format!(
                    "state {state} has {c} blocks of type {k} but N_{k} = {}",
                    self.mutation.size(k)
                )));
            }
        }
        Ok(())
    }

    /// `prod_k Phi^{(k)}_{j_k}(group sizes)` if `to` coarsens `from` within types.
    pub fn p_rep_entry(&self, from: &TypedPartition, to: &TypedPartition) -> Result<T> {
        self.check_state(from)?;
        let Some(groups) = from.merge_groups(to, self.types()) else {
            return Ok(T::zero());
        };
        let mut acc = T::one();
        for (law, g) in self.laws.iter().zip(&groups) {
            acc = acc * law.phi(g)?;
        }
        Ok(acc)
    }

    /// `prod_k prod_l (N_lk)_{n_kl} / (N_k)_{n_k}` if `to` has the blocks of `from`.
    pub fn p_mut_entry(&self, from: &TypedPartition, to: &TypedPartition) -> Result<T> {
        self.check_state(from)?;
        let k_types = self.types();
        let Some(table) = from.retyping(to, k_types) else {
            return Ok(T::zero());
        };
        let mut acc = T::one();
        for (k, row) in table.iter().enumerate() {
            let n_k: u64 = row.iter().sum();
            let mut num = T::one();
            for (l, &n_kl) in row.iter().enumerate() {
                num = num * falling::<T>(self.mutation.count(l, k), n_kl);
            }
            acc = acc * num / falling::<T>(self.mutation.size(k), n_k);
        }
        Ok(acc)
    }

    /// Typed partitions of `{1..n}`; requires `n <= min_k N_k` so that every state
    /// is attainable.
    pub fn state_space(&self, n: usize, cap: usize) -> Result<Arc<StateSpace<TypedPartition>>> {
        if n as u64 > self.min_size() {
            return Err(Error::domain(format!(
                "sample size {n} exceeds the smallest subpopulation size {}",
                self.min_size()
            )));
        }
        Ok(Arc::new(enumerate_typed_partitions(n, self.types(), cap)?))
    }

    pub fn matrices(&self, n: usize, cap: usize) -> Result<FixedMatrices<T>> {
        self.matrices_on(self.state_space(n, cap)?)
    }

    pub fn matrices_on(&self, space: Arc<StateSpace<TypedPartition>>) -> Result<FixedMatrices<T>> {
        for s in space.states() {
            self.check_state(s)?;
        }
        let p_mut = self.build(&space, |a, b| self.p_mut_entry(a, b))?;
        let p_rep = self.build(&space, |a, b| self.p_rep_entry(a, b))?;
        let p = p_mut.matmul(&p_rep)?;
        Ok(FixedMatrices { p_mut, p_rep, p })
    }

    /// `P = P^mut P^rep` over typed partitions of `{1..n}`.
    pub fn transition_matrix(&self, n: usize, cap: usize) -> Result<StateMatrix<TypedPartition, T>> {
        Ok(self.matrices(n, cap)?.p)
    }

    fn build<F>(&self, space: &Arc<StateSpace<TypedPartition>>, entry: F) -> Result<StateMatrix<TypedPartition, T>>
    where
        F: Fn(&TypedPartition, &TypedPartition) -> Result<T> + Sync + Send,
    {
        let len = space.len();
        let rows: Vec<Result<Vec<T>>> = {
            use rayon::prelude::*;
            (0..len)
                .into_par_iter()
                .map(|i| {
                    let from = space.state(i);
                    space.states().iter().map(|to| entry(from, to)).collect()
                })
                .collect()
        };
        let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
        Ok(StateMatrix::new(Arc::clone(space), DenseMatrix::from_rows(rows)))
    }

    /// One generation backward: the mutation sub-step then the reproduction sub-step.
    pub fn step<R: Rng + ?Sized>(&self, state: &TypedPartition, rng: &mut R) -> TypedPartition {
        let retyped = self.mutation_step(state, rng);
        self.reproduction_step(&retyped, rng)
    }

    /// Each `k`-block is a distinct type-`k` individual after mutation; the
    /// subpopulation it was born in is drawn without replacement from the groups
    /// of sizes `N_lk`.
    fn mutation_step<R: Rng + ?Sized>(&self, state: &TypedPartition, rng: &mut R) -> TypedPartition {
        if self.mutation.is_trivial() {
            return state.clone();
        }
        let k_types = self.types();
        let mut remaining: Vec<Vec<u64>> = (0..k_types)
            .map(|k| (0..k_types).map(|l| self.mutation.count(l, k)).collect())
            .collect();
        let mut left: Vec<u64> = self.mutation.sizes().to_vec();
        let blocks = state
            .blocks()
            .iter()
            .map(|&(mask, k)| {
                let mut pick = rng.random_range(0..left[k]);
                let mut origin = k;
                for (l, slot) in remaining[k].iter_mut().enumerate() {
                    if pick < *slot {
                        origin = l;
                        *slot -= 1;
                        break;
                    }
                    pick -= *slot;
                }
                left[k] -= 1;
                (mask, origin)
            })
            .collect();
        TypedPartition::new(state.n(), blocks).expect("same blocks")
    }

    /// Draws offspring numbers per subpopulation, places the `k`-blocks on distinct
    /// uniformly chosen children and merges blocks that share a parent.
    fn reproduction_step<R: Rng + ?Sized>(&self, state: &TypedPartition, rng: &mut R) -> TypedPartition {
        let mut merged: BTreeMap<(usize, usize), u64> = BTreeMap::new();
        for (k, law) in self.laws.iter().enumerate() {
            let members: Vec<u64> = state
                .blocks()
                .iter()
                .filter(|&&(_, t)| t == k)
                .map(|&(mask, _)| mask)
                .collect();
            if members.is_empty() {
                continue;
            }
            let nu = law.sample(rng);
            let mut bounds = Vec::with_capacity(nu.len());
            let mut acc = 0u64;
            for &v in &nu {
                acc += v;
                bounds.push(acc);
            }
            let slots = rand::seq::index::sample(rng, law.size() as usize, members.len());
            for (mask, slot) in members.iter().zip(slots) {
                let parent = bounds.partition_point(|&b| b <= slot as u64);
                *merged.entry((k, parent)).or_default() |= mask;
            }
        }
        let blocks = merged.into_iter().map(|((k, _), mask)| (mask, k)).collect();
        TypedPartition::new(state.n(), blocks).expect("merging preserves the cover")
    }

    /// Path of the ancestral chain over `horizon` generations, starting at `initial`.
    pub fn simulate_ancestry<R: Rng + ?Sized>(
        &self,
        initial: &TypedPartition,
        horizon: u64,
        rng: &mut R,
    ) -> Result<Vec<TypedPartition>> {
        self.check_state(initial)?;
        let mut path = Vec::with_capacity(horizon as usize + 1);
        path.push(initial.clone());
        for _ in 0..horizon {
            let next = self.step(path.last().expect("non-empty"), rng);
            path.push(next);
        }
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::DEFAULT_STATE_CAP;
    use num_rational::BigRational;
    use rand::SeedableRng;

    type Q = BigRational;

    fn wf_model(sizes: &[u64], counts: Vec<Vec<u64>>) -> FixedModel<Q> {
        let laws = sizes.iter().map(|&n| OffspringLaw::wright_fisher(n).unwrap()).collect();
        FixedModel::new(laws, MutationCountTable::new(sizes.to_vec(), counts).unwrap()).unwrap()
    }

    fn tp(s: &str) -> TypedPartition {
        s.parse().unwrap()
    }

    #[test]
    fn p_rep_examples() {
        let m = wf_model(&[10, 10], vec![vec![0, 0], vec![0, 0]]);
        let two = tp("{1}:a|{2}:a");
        assert_eq!(m.p_rep_entry(&two, &two).unwrap(), Q::from_ratio(9, 10));
        assert_eq!(
            m.p_rep_entry(&tp("{1}:a|{2}:b"), &tp("{1,2}:a")).unwrap(),
            Q::from_count(0)
        );
        let small = wf_model(&[2], vec![vec![0]]);
        assert_eq!(small.p_rep_entry(&two, &tp("{1,2}:a")).unwrap(), Q::from_ratio(1, 2));
    }

    #[test]
    fn p_mut_examples() {
        let m = wf_model(&[10, 8], vec![vec![0, 3], vec![3, 0]]);
        let a = tp("{1,2,3}:a");
        // m_ab = N_ba / N_a = 3/10.
        assert_eq!(m.p_mut_entry(&a, &tp("{1,2,3}:b")).unwrap(), Q::from_ratio(3, 10));
        assert_eq!(m.p_mut_entry(&a, &tp("{1,2}:a|{3}:a")).unwrap(), Q::from_count(0));
        let none = wf_model(&[10, 8], vec![vec![0, 0], vec![0, 0]]);
        let two = tp("{1}:a|{2}:b");
        assert_eq!(none.p_mut_entry(&two, &two).unwrap(), Q::from_count(1));
    }

    #[test]
    fn dirac_without_mutation_is_identity() {
        let laws = vec![OffspringLaw::<Q>::dirac(4).unwrap(); 2];
        let m = FixedModel::new(laws, MutationCountTable::none(vec![4, 4]).unwrap()).unwrap();
        let p = m.transition_matrix(3, DEFAULT_STATE_CAP).unwrap();
        assert_eq!(p.values(), &DenseMatrix::identity(p.len()));
    }

    #[test]
    fn single_type_pair_merge() {
        let m = wf_model(&[4], vec![vec![0]]);
        let p = m.transition_matrix(2, DEFAULT_STATE_CAP).unwrap();
        assert_eq!(p.entry(&tp("{1}:a|{2}:a"), &tp("{1,2}:a")), Q::from_ratio(1, 4));
    }

    #[test]
    fn oversized_sample_rejected() {
        let m = wf_model(&[2, 3], vec![vec![0, 0], vec![0, 0]]);
        assert!(m.transition_matrix(3, DEFAULT_STATE_CAP).is_err());
    }

    #[test]
    fn simulation_block_count_non_increasing() {
        let laws = vec![OffspringLaw::<f64>::wright_fisher(6).unwrap(); 2];
        let table = MutationCountTable::new(vec![6, 6], vec![vec![0, 2], vec![2, 0]]).unwrap();
        let m = FixedModel::new(laws, table).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let start = TypedPartition::singletons(&[0, 1, 0, 1]).unwrap();
        for _ in 0..50 {
            let path = m.simulate_ancestry(&start, 20, &mut rng).unwrap();
            for w in path.windows(2) {
                assert!(w[1].num_blocks() <= w[0].num_blocks());
            }
        }
        let frozen = FixedModel::new(
            vec![OffspringLaw::<f64>::dirac(6).unwrap(); 2],
            MutationCountTable::none(vec![6, 6]).unwrap(),
        )
        .unwrap();
        let path = frozen.simulate_ancestry(&start, 10, &mut rng).unwrap();
        assert!(path.iter().all(|s| *s == start));
    }
}

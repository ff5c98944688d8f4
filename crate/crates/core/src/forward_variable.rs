//! The model with variable subpopulation sizes, forward in time: a single Cannings
//! population of size `N` whose children mutate independently by a stochastic
//! matrix `U`. States are type-count vectors in `Delta_N = {i : sum i_k = N}`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use crate::combinatorics::{for_each_composition, for_each_contingency_table, simplex_points};
use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, StateMatrix, StateSpace};
use crate::mutation::MutationMatrix;
use crate::offspring::{OffspringKind, OffspringLaw};
use crate::scalar::{exact_binomial, factorial, pow, Scalar};

/// Largest population size for which ordered offspring vectors are enumerated.
pub const MAX_DIRECT_SIZE: u64 = 8;

/// A vector of per-type counts.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TypeCounts(Vec<u64>);

impl TypeCounts {
    pub fn new(counts: Vec<u64>) -> Self {
        TypeCounts(counts)
    }

    pub fn counts(&self) -> &[u64] {
        &self.0
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }
}

impl fmt::Display for TypeCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (r, c) in self.0.iter().enumerate() {
            if r > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str(")")
    }
}

/// Sparse distribution over count vectors.
pub type CountLaw<T> = BTreeMap<Vec<u64>, T>;

/// `Pi^rep`, `Pi^mut` and `Pi = Pi^rep Pi^mut` over `Delta_N`.
#[derive(Clone, Debug)]
pub struct ForwardMatrices<T> {
    pub pi_rep: StateMatrix<TypeCounts, T>,
    pub pi_mut: StateMatrix<TypeCounts, T>,
    pub pi: StateMatrix<TypeCounts, T>,
}

#[derive(Clone, Debug)]
pub struct VariableModel<T = f64> {
    law: OffspringLaw<T>,
    mutation: MutationMatrix<T>,
}

impl<T: Scalar> VariableModel<T> {
    pub fn new(law: OffspringLaw<T>, mutation: MutationMatrix<T>) -> Self {
        VariableModel { law, mutation }
    }

    pub fn law(&self) -> &OffspringLaw<T> {
        &self.law
    }

    pub fn mutation(&self) -> &MutationMatrix<T> {
        &self.mutation
    }

    pub fn size(&self) -> u64 {
        self.law.size()
    }

    pub fn types(&self) -> usize {
        self.mutation.types()
    }

    fn check_state(&self, i: &[u64]) -> Result<()> {
        if i.len() != self.types() || i.iter().sum::<u64>() != self.size() {
            return Err(Error::domain(format!(
                "{:?} is not a state with {} types summing to {}",
                i,
                self.types(),
                self.size()
            )));
        }
        Ok(())
    }

    /// `Delta_N` in lexicographic order, bounded by `cap` states.
    pub fn state_space(&self, cap: usize) -> Result<Arc<StateSpace<TypeCounts>>> {
        let k = self.types() as u64;
        let n = self.size();
        let size = exact_binomial(n + k - 1, n);
        if size > cap as u128 {
            return Err(Error::Size { size, cap });
        }
        Ok(Arc::new(StateSpace::new(
            simplex_points(n, self.types()).into_iter().map(TypeCounts).collect(),
        )))
    }

    /// Law of `D(i)`: block sums of the offspring vector over consecutive index
    /// blocks of sizes `i_1, ..., i_K`.
    pub fn reproduction_law(&self, i: &[u64]) -> Result<CountLaw<T>> {
        self.check_state(i)?;
        let n = self.size();
        let mut out = CountLaw::new();
        match self.law.kind() {
            OffspringKind::WrightFisher => {
                let probs: Vec<T> = i.iter().map(|&x| T::from_ratio(x, n)).collect();
                for_each_composition(n, i.len(), |j| {
                    let p = T::multinomial_pmf(&probs, j);
                    if !p.is_zero() {
                        out.insert(j.to_vec(), p);
                    }
                });
            }
            OffspringKind::Kimura { c } => {
                let caps: Vec<u64> = i.iter().map(|&x| c * x).collect();
                crate::combinatorics::for_each_bounded_composition(n, &caps, &mut |j: &[u64]| {
                    let nums: Vec<(u64, u64)> = caps.iter().copied().zip(j.iter().copied()).collect();
                    out.insert(j.to_vec(), T::binomial_ratio(&nums, (c * n, n)));
                });
            }
            OffspringKind::Dirac => {
                out.insert(i.to_vec(), T::one());
            }
            OffspringKind::ExtremePermutation => {
                for (k, &x) in i.iter().enumerate() {
                    if x > 0 {
                        let mut j = vec![0; i.len()];
                        j[k] = n;
                        out.insert(j, T::from_ratio(x, n));
                    }
                }
            }
            OffspringKind::Table(_) => return self.reproduction_law_by_shapes(i),
        }
        Ok(out)
    }

    /// Law of `D(i)` from the multiset shapes of the offspring law: a uniform
    /// arrangement of a shape allocates `a_vk` copies of value `v` to block `k`
    /// with probability `prod_k i_k! prod_v c_v! / (N! prod a_vk!)`.
    pub fn reproduction_law_by_shapes(&self, i: &[u64]) -> Result<CountLaw<T>> {
        self.check_state(i)?;
        let n = self.size();
        let k_types = i.len();
        let mut out = CountLaw::new();
        let mut base = factorial::<T>(n).recip_or_zero();
        for &x in i {
            base = base * factorial::<T>(x);
        }
        for (shape, p) in self.law.shapes()? {
            let mut values: BTreeMap<u64, u64> = BTreeMap::new();
            for &v in &shape {
                *values.entry(v).or_default() += 1;
            }
            let vals: Vec<u64> = values.keys().copied().collect();
            let mults: Vec<u64> = values.values().copied().collect();
            let mut weight = p * base.clone();
            for &m in &mults {
                weight = weight * factorial::<T>(m);
            }
            for_each_contingency_table(&mults, i, |table| {
                let mut d = vec![0u64; k_types];
                let mut denom = T::one();
                for (r, &v) in vals.iter().enumerate() {
                    for (k, dk) in d.iter_mut().enumerate() {
                        let a = table[r * k_types + k];
                        *dk += v * a;
                        denom = denom * factorial::<T>(a);
                    }
                }
                let slot = out.entry(d).or_insert_with(T::zero);
                *slot = slot.clone() + weight.clone() / denom;
            });
        }
        out.retain(|_, p| !p.is_zero());
        Ok(out)
    }

    pub fn pi_rep_entry(&self, i: &[u64], j: &[u64]) -> Result<T> {
        Ok(self.reproduction_law(i)?.remove(j).unwrap_or_else(T::zero))
    }

    /// `P(M_1 + ... + M_K = j)` with independent `M_k ~ Mn(i_k, row k of U)`, as a
    /// sum over non-negative matrices with row sums `i` and column sums `j`.
    pub fn pi_mut_entry(&self, i: &[u64], j: &[u64]) -> T {
        let k_types = self.types();
        if i.len() != k_types || j.len() != k_types {
            return T::zero();
        }
        let mut total = Vec::new();
        for_each_contingency_table(i, j, |m| {
            let mut term = T::one();
            for k in 0..k_types {
                let row = &m[k * k_types..(k + 1) * k_types];
                term = term * self.mutation.multinomial_mutation_pmf(k, i[k], row);
                if term.is_zero() {
                    break;
                }
            }
            total.push(term);
        });
        T::sum_all(total)
    }

    /// Law of the type counts after mutating `d_k` children of each type `k`.
    pub fn mutation_law(&self, d: &[u64]) -> CountLaw<T> {
        let k_types = self.types();
        let mut acc: CountLaw<T> = CountLaw::new();
        acc.insert(vec![0; k_types], T::one());
        for (k, &dk) in d.iter().enumerate() {
            if dk == 0 {
                continue;
            }
            let mut part = Vec::new();
            for_each_composition(dk, k_types, |m| {
                let p = self.mutation.multinomial_mutation_pmf(k, dk, m);
                if !p.is_zero() {
                    part.push((m.to_vec(), p));
                }
            });
            let mut next = CountLaw::new();
            for (base, p) in &acc {
                for (m, q) in &part {
                    let key: Vec<u64> = base.iter().zip(m).map(|(a, b)| a + b).collect();
                    let slot = next.entry(key).or_insert_with(T::zero);
                    *slot = slot.clone() + p.clone() * q.clone();
                }
            }
            acc = next;
        }
        acc
    }

    /// Row `i` of `Pi`, as a sparse law over `Delta_N`.
    pub fn transition_law(&self, i: &[u64]) -> Result<CountLaw<T>> {
        let mut out = CountLaw::new();
        for (d, p) in self.reproduction_law(i)? {
            for (j, q) in self.mutation_law(&d) {
                let slot = out.entry(j).or_insert_with(T::zero);
                *slot = slot.clone() + p.clone() * q;
            }
        }
        Ok(out)
    }

    pub fn matrices(&self, cap: usize) -> Result<ForwardMatrices<T>> {
        let space = self.state_space(cap)?;
        let len = space.len();
        let rep_rows: Vec<Result<Vec<T>>> = (0..len)
            .into_par_iter()
            .map(|a| {
                let law = self.reproduction_law(space.state(a).counts())?;
                let mut row = vec![T::zero(); len];
                for (j, p) in law {
                    let b = space.index_of(&TypeCounts(j)).expect("D(i) lies in Delta_N");
                    row[b] = p;
                }
                Ok(row)
            })
            .collect();
        let rep_rows = rep_rows.into_iter().collect::<Result<Vec<_>>>()?;
        let pi_rep = StateMatrix::new(Arc::clone(&space), DenseMatrix::from_rows(rep_rows));
        let mut_values = DenseMatrix::from_row_fn(len, len, |a| {
            let i = space.state(a).counts();
            space
                .states()
                .iter()
                .map(|j| self.pi_mut_entry(i, j.counts()))
                .collect()
        });
        let pi_mut = StateMatrix::new(Arc::clone(&space), mut_values);
        let pi = pi_rep.matmul(&pi_mut)?;
        Ok(ForwardMatrices { pi_rep, pi_mut, pi })
    }

    /// `Pi = Pi^rep Pi^mut` over `Delta_N`.
    pub fn forward_transition_matrix(&self, cap: usize) -> Result<StateMatrix<TypeCounts, T>> {
        Ok(self.matrices(cap)?.pi)
    }

    /// `pi_ij` by direct expansion over every ordered offspring vector and every
    /// mutation matrix `M` with row sums `D(i)` and column sums `j`.
    pub fn direct_transition_probability(&self, i: &[u64], j: &[u64]) -> Result<T> {
        self.check_state(i)?;
        self.check_state(j)?;
        let n = self.size();
        if n > MAX_DIRECT_SIZE {
            return Err(Error::Size {
                size: n as u128,
                cap: MAX_DIRECT_SIZE as usize,
            });
        }
        let k_types = self.types();
        let mut terms = Vec::new();
        for_each_composition(n, n as usize, |nu| {
            let p = self.law.outcome_probability(nu);
            if p.is_zero() {
                return;
            }
            let mut d = vec![0u64; k_types];
            let mut pos = 0usize;
            for (k, &ik) in i.iter().enumerate() {
                d[k] = nu[pos..pos + ik as usize].iter().sum();
                pos += ik as usize;
            }
            let mut inner = Vec::new();
            for_each_contingency_table(&d, j, |m| {
                let mut term = T::one();
                for k in 0..k_types {
                    term = term * factorial::<T>(d[k]);
                    for l in 0..k_types {
                        let x = m[k * k_types + l];
                        term = term * pow(self.mutation.get(k, l), x) / factorial::<T>(x);
                    }
                }
                inner.push(term);
            });
            terms.push(p * T::sum_all(inner));
        });
        Ok(T::sum_all(terms))
    }

    /// Transition probability of the typed-individual chain:
    /// `prod_k j_k! / N! * pi_{f(x) f(y)}` where `f` counts types.
    pub fn typed_individual_transition(&self, x: &[usize], y: &[usize]) -> Result<T> {
        let i = self.count_types(x)?;
        let j = self.count_types(y)?;
        let pi = self.transition_law(&i)?.remove(&j).unwrap_or_else(T::zero);
        let mut scale = factorial::<T>(self.size()).recip_or_zero();
        for &jk in &j {
            scale = scale * factorial::<T>(jk);
        }
        Ok(scale * pi)
    }

    /// The same probability as an average over child orderings:
    /// `1/N! sum_sigma E[prod_i prod_{c in (C_{i-1}, C_i]} u_{x_i, y_sigma(c)}]`.
    pub fn typed_individual_by_permutations(&self, x: &[usize], y: &[usize]) -> Result<T> {
        self.count_types(x)?;
        self.count_types(y)?;
        let n = self.size();
        if n > MAX_DIRECT_SIZE {
            return Err(Error::Size {
                size: n as u128,
                cap: MAX_DIRECT_SIZE as usize,
            });
        }
        let mut outcomes = Vec::new();
        for_each_composition(n, n as usize, |nu| {
            let p = self.law.outcome_probability(nu);
            if !p.is_zero() {
                outcomes.push((nu.to_vec(), p));
            }
        });
        let mut terms = Vec::new();
        for_each_permutation(n as usize, |sigma| {
            for (nu, p) in &outcomes {
                let mut prod = p.clone();
                let mut child = 0usize;
                for (parent, &count) in nu.iter().enumerate() {
                    for _ in 0..count {
                        prod = prod * self.mutation.get(x[parent], y[sigma[child]]).clone();
                        child += 1;
                    }
                }
                terms.push(prod);
            }
        });
        Ok(T::sum_all(terms) / factorial::<T>(n))
    }

    fn count_types(&self, x: &[usize]) -> Result<Vec<u64>> {
        if x.len() as u64 != self.size() || x.iter().any(|&t| t >= self.types()) {
            return Err(Error::domain("type vector must have length N and valid types"));
        }
        let mut out = vec![0u64; self.types()];
        for &t in x {
            out[t] += 1;
        }
        Ok(out)
    }

    /// One generation forward: reproduce, aggregate by parental type, mutate.
    pub fn step<R: Rng + ?Sized>(&self, i: &[u64], rng: &mut R) -> Vec<u64> {
        let nu = self.law.sample(rng);
        let mut next = vec![0u64; self.types()];
        let mut pos = 0usize;
        for (k, &ik) in i.iter().enumerate() {
            let dk: u64 = nu[pos..pos + ik as usize].iter().sum();
            pos += ik as usize;
            if dk == 0 {
                continue;
            }
            for (slot, m) in next.iter_mut().zip(self.mutation.sample_mutation(k, dk, rng)) {
                *slot += m;
            }
        }
        next
    }

    pub fn simulate_forward<R: Rng + ?Sized>(
        &self,
        initial: &[u64],
        horizon: u64,
        rng: &mut R,
    ) -> Result<Vec<TypeCounts>> {
        self.check_state(initial)?;
        let mut path = vec![TypeCounts(initial.to_vec())];
        for _ in 0..horizon {
            let next = self.step(path.last().expect("non-empty").counts(), rng);
            path.push(TypeCounts(next));
        }
        Ok(path)
    }
}

trait RecipOrZero {
    fn recip_or_zero(self) -> Self;
}

impl<T: Scalar> RecipOrZero for T {
    fn recip_or_zero(self) -> Self {
        if self.is_zero() {
            T::zero()
        } else {
            T::one() / self
        }
    }
}

/// Calls `f` with every permutation of `0..n` (Heap's algorithm).
pub fn for_each_permutation<F: FnMut(&[usize])>(n: usize, mut f: F) {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    f(&perm);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            f(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

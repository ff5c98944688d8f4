//! Exchangeable offspring laws of a Cannings population of fixed size `N`.
//!
//! The central quantity is the scaled joint factorial moment
//!
//! ```text
//! Phi_j(k_1..k_j) = (N)_j / (N)_k * E[(nu_1)_{k_1} ... (nu_j)_{k_j}],   k = k_1 + ... + k_j,
//! ```
//!
//! the probability that `k` sampled children split into `j` sibling groups of the
//! given sizes with distinct parents. Closed forms are used where they exist; every
//! law can also be evaluated by enumerating its multiset shapes.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Binomial, Poisson};

use crate::combinatorics::for_each_integer_partition;
use crate::error::{Error, Result};
use crate::scalar::{factorial, falling, falling_real, pow, Real, Scalar};

/// Shapes are enumerated only up to this population size.
pub const MAX_SHAPE_ENUMERATION_SIZE: u64 = 40;

/// Tolerance for the total mass of a user-supplied table law.
pub const TABLE_NORMALIZATION_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub enum OffspringKind<T> {
    /// Symmetric multinomial `Mn(N, 1/N, ..., 1/N)`.
    WrightFisher,
    /// Symmetric multi-hypergeometric: `N` draws from `c` copies of each parent.
    Kimura { c: u64 },
    /// Every parent has exactly one child.
    Dirac,
    /// A uniformly placed parent has all `N` children.
    ExtremePermutation,
    /// Explicit law: non-increasing compositions of `N` with their probabilities.
    /// Each composition stands for all of its distinct rearrangements, equally likely.
    Table(Vec<(Vec<u64>, T)>),
}

/// Family of an offspring law, independent of its size.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LawFamily {
    WrightFisher,
    Kimura { c: u64 },
    Dirac,
    ExtremePermutation,
    Table,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OffspringLaw<T = f64> {
    size: u64,
    kind: OffspringKind<T>,
}

impl<T: Scalar> OffspringLaw<T> {
    fn checked(size: u64, kind: OffspringKind<T>) -> Result<Self> {
        if size == 0 {
            return Err(Error::invalid("offspring law", "population size must be positive"));
        }
        Ok(OffspringLaw { size, kind })
    }

    pub fn wright_fisher(size: u64) -> Result<Self> {
        Self::checked(size, OffspringKind::WrightFisher)
    }

    pub fn kimura(size: u64, c: u64) -> Result<Self> {
        if c == 0 {
            return Err(Error::invalid("offspring law", "Kimura parameter c must be positive"));
        }
        Self::checked(size, OffspringKind::Kimura { c })
    }

    pub fn dirac(size: u64) -> Result<Self> {
        Self::checked(size, OffspringKind::Dirac)
    }

    pub fn extreme_permutation(size: u64) -> Result<Self> {
        Self::checked(size, OffspringKind::ExtremePermutation)
    }

    /// Explicit law from `(composition, probability)` pairs. Compositions may be in
    /// any order and shorter than `size` (missing parents have no children); they
    /// are sorted and merged, so the stored law is exchangeable.
    pub fn table(size: u64, outcomes: Vec<(Vec<u64>, T)>) -> Result<Self> {
        if size == 0 {
            return Err(Error::invalid("offspring law", "population size must be positive"));
        }
        let mut merged: BTreeMap<Vec<u64>, T> = BTreeMap::new();
        for (idx, (comp, p)) in outcomes.into_iter().enumerate() {
            if comp.len() as u64 > size {
                return Err(Error::invalid(
                    "offspring table",
                    format!("outcome {idx} has {} entries for N = {size}", comp.len()),
                ));
            }
            let total: u64 = comp.iter().sum();
            if total != size {
                return Err(Error::invalid(
                    "offspring table",
                    format!("outcome {idx} sums to {total}, expected {size}"),
                ));
            }
            if p < T::zero() {
                return Err(Error::invalid(
                    "offspring table",
                    format!("outcome {idx} has negative probability"),
                ));
            }
            let mut shape = comp;
            shape.resize(size as usize, 0);
            shape.sort_unstable_by(|a, b| b.cmp(a));
            let slot = merged.entry(shape).or_insert_with(T::zero);
            *slot = slot.clone() + p;
        }
        let total = T::sum_all(merged.values().cloned());
        if (total.approx() - 1.0).abs() > TABLE_NORMALIZATION_TOL {
            return Err(Error::invalid(
                "offspring table",
                format!("probabilities sum to {}, expected 1", total.approx()),
            ));
        }
        let entries = merged.into_iter().rev().filter(|(_, p)| !p.is_zero()).collect();
        Ok(OffspringLaw {
            size,
            kind: OffspringKind::Table(entries),
        })
    }

    pub fn size(&self) -> u64 {
        self.size
    }

    pub fn kind(&self) -> &OffspringKind<T> {
        &self.kind
    }

    pub fn family(&self) -> LawFamily {
        match self.kind {
            OffspringKind::WrightFisher => LawFamily::WrightFisher,
            OffspringKind::Kimura { c } => LawFamily::Kimura { c },
            OffspringKind::Dirac => LawFamily::Dirac,
            OffspringKind::ExtremePermutation => LawFamily::ExtremePermutation,
            OffspringKind::Table(_) => LawFamily::Table,
        }
    }

    /// Same family at a different population size; tables have no such family.
    pub fn with_size(&self, size: u64) -> Result<Self> {
        match self.kind {
            OffspringKind::Table(_) => Err(Error::Unsupported(
                "a table law cannot be rescaled to another population size".into(),
            )),
            ref kind => Self::checked(size, kind.clone()),
        }
    }

    fn check_counts(&self, counts: &[u64]) -> Result<u64> {
        if counts.contains(&0) {
            return Err(Error::domain("Phi counts must be positive"));
        }
        let j = counts.len() as u64;
        let k: u64 = counts.iter().sum();
        if j > self.size || k > self.size {
            return Err(Error::domain(format!(
                "Phi_{j} with total {k} is undefined for N = {}",
                self.size
            )));
        }
        Ok(k)
    }

    /// `Phi_j(k_1..k_j)`. The empty argument list gives `Phi_0() = 1`.
    pub fn phi(&self, counts: &[u64]) -> Result<T> {
        let k = self.check_counts(counts)?;
        let n = self.size;
        let j = counts.len() as u64;
        Ok(match &self.kind {
            OffspringKind::WrightFisher => falling::<T>(n, j) / pow(&T::from_count(n), k),
            OffspringKind::Kimura { c } => {
                let mut num = falling::<T>(n, j);
                for &kr in counts {
                    num = num * falling::<T>(*c, kr);
                }
                num / falling::<T>(c * n, k)
            }
            OffspringKind::Dirac => {
                if counts.iter().all(|&x| x == 1) {
                    T::one()
                } else {
                    T::zero()
                }
            }
            OffspringKind::ExtremePermutation => {
                if j <= 1 {
                    T::one()
                } else {
                    T::zero()
                }
            }
            OffspringKind::Table(_) => self.phi_from_shapes(counts)?,
        })
    }

    /// `Phi_j` evaluated by enumerating the multiset shapes of the law, independent of
    /// the closed forms used by [`OffspringLaw::phi`].
    pub fn phi_by_enumeration(&self, counts: &[u64]) -> Result<T> {
        self.check_counts(counts)?;
        self.phi_from_shapes(counts)
    }

    fn phi_from_shapes(&self, counts: &[u64]) -> Result<T> {
        let k: u64 = counts.iter().sum();
        let shapes = self.shapes()?;
        let terms = shapes
            .iter()
            .map(|(shape, p)| p.clone() * injective_factorial_sum::<T>(shape, counts));
        Ok(T::sum_all(terms) / falling::<T>(self.size, k))
    }

    /// Joint descending factorial moment `E[(nu_1)_{k_1} ... (nu_j)_{k_j}]`.
    pub fn joint_factorial_moment(&self, counts: &[u64]) -> Result<T> {
        let k = self.check_counts(counts)?;
        let j = counts.len() as u64;
        Ok(self.phi(counts)? * falling::<T>(self.size, k) / falling::<T>(self.size, j))
    }

    /// Coalescence probability `c_N = Phi_1(2)`.
    pub fn coalescence_probability(&self) -> Result<T> {
        if self.size < 2 {
            return Err(Error::domain("coalescence probability needs N >= 2"));
        }
        self.phi(&[2])
    }

    /// Residual of the consistency relation
    /// `Phi_j(k) - Phi_{j+1}(k, 1) - sum_i Phi_j(k + e_i)`.
    pub fn check_consistency(&self, counts: &[u64]) -> Result<T> {
        let k: u64 = counts.iter().sum();
        if k >= self.size {
            return Err(Error::domain("consistency needs k_1 + ... + k_j < N"));
        }
        let mut residual = self.phi(counts)?;
        let mut extended = counts.to_vec();
        extended.push(1);
        residual = residual - self.phi(&extended)?;
        for i in 0..counts.len() {
            let mut bumped = counts.to_vec();
            bumped[i] += 1;
            residual = residual - self.phi(&bumped)?;
        }
        Ok(residual)
    }

    /// Probability of one ordered outcome `(nu_1, ..., nu_N)`.
    pub fn outcome_probability(&self, outcome: &[u64]) -> T {
        let n = self.size;
        if outcome.len() as u64 != n || outcome.iter().sum::<u64>() != n {
            return T::zero();
        }
        match &self.kind {
            OffspringKind::WrightFisher => {
                let mut denom = pow(&T::from_count(n), n);
                for &m in outcome {
                    denom = denom * factorial::<T>(m);
                }
                factorial::<T>(n) / denom
            }
            OffspringKind::Kimura { c } => {
                let mut num = T::one();
                for &m in outcome {
                    num = num * T::binomial(*c, m);
                }
                num / T::binomial(c * n, n)
            }
            OffspringKind::Dirac => {
                if outcome.iter().all(|&m| m == 1) {
                    T::one()
                } else {
                    T::zero()
                }
            }
            OffspringKind::ExtremePermutation => {
                if outcome.contains(&n) {
                    T::one() / T::from_count(n)
                } else {
                    T::zero()
                }
            }
            OffspringKind::Table(entries) => {
                let mut sorted = outcome.to_vec();
                sorted.sort_unstable_by(|a, b| b.cmp(a));
                entries
                    .iter()
                    .find(|(s, _)| *s == sorted)
                    .map_or_else(T::zero, |(s, p)| p.clone() / distinct_permutations::<T>(s))
            }
        }
    }

    /// The law as a list of non-increasing shapes (length `N`) with the total
    /// probability of all their rearrangements.
    pub fn shapes(&self) -> Result<Vec<(Vec<u64>, T)>> {
        if let OffspringKind::Table(entries) = &self.kind {
            return Ok(entries.clone());
        }
        if self.size > MAX_SHAPE_ENUMERATION_SIZE {
            return Err(Error::Size {
                size: self.size as u128,
                cap: MAX_SHAPE_ENUMERATION_SIZE as usize,
            });
        }
        let n = self.size as usize;
        let mut out = Vec::new();
        for_each_integer_partition(self.size, |parts| {
            if parts.len() > n {
                return;
            }
            let mut shape = parts.to_vec();
            shape.resize(n, 0);
            let p = self.outcome_probability(&shape) * distinct_permutations::<T>(&shape);
            if !p.is_zero() {
                out.push((shape, p));
            }
        });
        Ok(out)
    }

    /// `P(nu_1 = m_1, ..., nu_j = m_j)` for any `j <= N`.
    pub fn joint_pmf(&self, values: &[u64]) -> Result<T> {
        let j = values.len() as u64;
        if j > self.size {
            return Err(Error::domain("joint pmf needs at most N coordinates"));
        }
        let shapes = self.shapes()?;
        let mut want: BTreeMap<u64, u64> = BTreeMap::new();
        for &v in values {
            *want.entry(v).or_default() += 1;
        }
        let terms = shapes.iter().map(|(shape, p)| {
            // Under a uniform rearrangement the first j entries are a uniform
            // ordered draw without replacement from the shape.
            let mut have: BTreeMap<u64, u64> = BTreeMap::new();
            for &v in shape {
                *have.entry(v).or_default() += 1;
            }
            let mut num = T::one();
            for (v, &a) in &want {
                num = num * falling::<T>(*have.get(v).unwrap_or(&0), a);
            }
            p.clone() * num / falling::<T>(self.size, j)
        });
        Ok(T::sum_all(terms))
    }

    /// Marginal pmf of `nu_1` on `0..=N`.
    pub fn marginal_pmf(&self) -> Vec<T> {
        let n = self.size;
        match &self.kind {
            OffspringKind::WrightFisher => {
                let p = T::one() / T::from_count(n);
                let q = T::one() - p.clone();
                (0..=n)
                    .map(|m| T::multinomial_pmf(&[p.clone(), q.clone()], &[m, n - m]))
                    .collect()
            }
            OffspringKind::Kimura { c } => (0..=n)
                .map(|m| {
                    if m > *c {
                        T::zero()
                    } else {
                        T::binomial_ratio(&[(*c, m), (c * (n - 1), n - m)], (c * n, n))
                    }
                })
                .collect(),
            OffspringKind::Dirac => (0..=n).map(|m| if m == 1 { T::one() } else { T::zero() }).collect(),
            OffspringKind::ExtremePermutation => {
                let mut pmf = vec![T::zero(); n as usize + 1];
                let top = T::one() / T::from_count(n);
                pmf[0] = pmf[0].clone() + (T::one() - top.clone());
                pmf[n as usize] = pmf[n as usize].clone() + top;
                pmf
            }
            OffspringKind::Table(entries) => {
                let mut pmf = vec![T::zero(); n as usize + 1];
                for (shape, p) in entries {
                    for &v in shape {
                        pmf[v as usize] = pmf[v as usize].clone() + p.clone() / T::from_count(n);
                    }
                }
                pmf
            }
        }
    }

    /// `Var(nu_1)` from the marginal pmf.
    pub fn variance(&self) -> T {
        let pmf = self.marginal_pmf();
        let mean = T::sum_all(pmf.iter().enumerate().map(|(m, p)| p.clone() * T::from_count(m as u64)));
        let second = T::sum_all(
            pmf.iter()
                .enumerate()
                .map(|(m, p)| p.clone() * T::from_count((m * m) as u64)),
        );
        second - mean.clone() * mean
    }

    /// Limiting law of a single offspring number as `N` grows within the family.
    pub fn limit_law(&self) -> Result<LimitOffspringLaw> {
        LimitOffspringLaw::for_family(self.family())
    }

    /// Draws one offspring vector.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<u64> {
        let n = self.size as usize;
        match &self.kind {
            OffspringKind::WrightFisher => {
                let mut out = vec![0u64; n];
                for _ in 0..n {
                    out[rng.random_range(0..n)] += 1;
                }
                out
            }
            OffspringKind::Kimura { c } => {
                let c = *c as usize;
                let mut out = vec![0u64; n];
                for ball in rand::seq::index::sample(rng, c * n, n) {
                    out[ball / c] += 1;
                }
                out
            }
            OffspringKind::Dirac => vec![1; n],
            OffspringKind::ExtremePermutation => {
                let mut out = vec![0u64; n];
                out[rng.random_range(0..n)] = n as u64;
                out
            }
            OffspringKind::Table(entries) => {
                let weights: Vec<f64> = entries.iter().map(|(_, p)| p.approx()).collect();
                let dist = WeightedIndex::new(&weights).expect("validated table weights");
                let mut out = entries[dist.sample(rng)].0.clone();
                out.shuffle(rng);
                out
            }
        }
    }
}

/// Number of distinct rearrangements of a vector.
pub fn distinct_permutations<T: Scalar>(values: &[u64]) -> T {
    let mut mult: BTreeMap<u64, u64> = BTreeMap::new();
    for &v in values {
        *mult.entry(v).or_default() += 1;
    }
    let mut out = factorial::<T>(values.len() as u64);
    for &m in mult.values() {
        out = out / factorial::<T>(m);
    }
    out
}

/// `sum over injective r -> position of prod_r (shape[pos_r])_{counts[r]}`.
fn injective_factorial_sum<T: Scalar>(shape: &[u64], counts: &[u64]) -> T {
    fn rec<T: Scalar>(shape: &[u64], counts: &[u64], r: usize, used: &mut [bool]) -> T {
        if r == counts.len() {
            return T::one();
        }
        let mut acc = T::zero();
        for pos in 0..shape.len() {
            if used[pos] || shape[pos] < counts[r] {
                continue;
            }
            used[pos] = true;
            let rest = rec::<T>(shape, counts, r + 1, used);
            used[pos] = false;
            if !rest.is_zero() {
                acc = acc + falling::<T>(shape[pos], counts[r]) * rest;
            }
        }
        acc
    }
    let mut used = vec![false; shape.len()];
    rec(shape, counts, 0, &mut used)
}

/// Limiting single-offspring law `xi` of an asymptotically independent family.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LimitOffspringLaw {
    /// Poisson with mean one (Wright-Fisher).
    Poisson,
    /// Binomial with `c` trials and success probability `1/c` (Kimura).
    Binomial { c: u64 },
    /// Point mass (1 for constant offspring, 0 for the extreme permutation law).
    PointMass { value: u64 },
}

/// Poisson tails are cut once the remaining mass drops below this.
pub const LIMIT_TAIL_MASS: f64 = 1e-14;

impl LimitOffspringLaw {
    pub fn for_family(family: LawFamily) -> Result<Self> {
        match family {
            LawFamily::WrightFisher => Ok(LimitOffspringLaw::Poisson),
            LawFamily::Kimura { c } => Ok(LimitOffspringLaw::Binomial { c }),
            LawFamily::Dirac => Ok(LimitOffspringLaw::PointMass { value: 1 }),
            LawFamily::ExtremePermutation => Ok(LimitOffspringLaw::PointMass { value: 0 }),
            LawFamily::Table => Err(Error::Unsupported("a table law has no large-population family".into())),
        }
    }

    pub fn pmf<F: Real>(&self, m: u64) -> F {
        match *self {
            LimitOffspringLaw::Poisson => (-F::one()).exp() / factorial::<F>(m),
            LimitOffspringLaw::Binomial { c } => {
                if m > c {
                    return F::zero();
                }
                let p = F::one() / F::from_count(c);
                F::multinomial_pmf(&[p, F::one() - p], &[m, c - m])
            }
            LimitOffspringLaw::PointMass { value } => {
                if m == value {
                    F::one()
                } else {
                    F::zero()
                }
            }
        }
    }

    /// Pmf on `0..len`, where `len` is the finite support size or the point at which
    /// the remaining tail mass is below [`LIMIT_TAIL_MASS`].
    pub fn truncated_pmf<F: Real>(&self) -> Vec<F> {
        match *self {
            LimitOffspringLaw::Binomial { c } => (0..=c).map(|m| self.pmf(m)).collect(),
            LimitOffspringLaw::PointMass { value } => (0..=value).map(|m| self.pmf(m)).collect(),
            LimitOffspringLaw::Poisson => {
                let mut out = Vec::new();
                let mut cum = F::zero();
                let tail = F::from_f64(LIMIT_TAIL_MASS).expect("finite");
                let mut m = 0;
                while F::one() - cum >= tail && m < 200 {
                    let p = self.pmf::<F>(m);
                    cum = cum + p;
                    out.push(p);
                    m += 1;
                }
                out
            }
        }
    }

    pub fn mean<F: Real>(&self) -> F {
        self.factorial_moment(1)
    }

    /// `E[(xi)_n]`.
    pub fn factorial_moment<F: Real>(&self, n: u64) -> F {
        match *self {
            LimitOffspringLaw::Poisson => F::one(),
            LimitOffspringLaw::Binomial { c } => falling::<F>(c, n) / pow(&F::from_count(c), n),
            LimitOffspringLaw::PointMass { value } => falling::<F>(value, n),
        }
    }

    /// `E[(xi)_n x^(xi - n)]` by direct summation over the truncated pmf.
    pub fn mixed_factorial_moment<F: Real>(&self, n: u64, x: F) -> F {
        let pmf = self.truncated_pmf::<F>();
        F::sum_all(pmf.iter().enumerate().skip(n as usize).map(|(m, p)| {
            let m = m as u64;
            *p * falling_real(F::from_count(m), n) * pow(&x, m - n)
        }))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match *self {
            LimitOffspringLaw::Poisson => Poisson::new(1.0).expect("valid rate").sample(rng) as u64,
            LimitOffspringLaw::Binomial { c } => Binomial::new(c, 1.0 / c as f64).expect("valid binomial").sample(rng),
            LimitOffspringLaw::PointMass { value } => value,
        }
    }
}

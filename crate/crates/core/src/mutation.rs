//! Mutation structures: integer mutation-count tables for the model with fixed
//! subpopulation sizes and stochastic mutation matrices for the model with
//! variable subpopulation sizes.

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::scalar::{from_f64, Scalar};

/// Row sums of a mutation matrix must be within this of one.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Numbers `N_kl` of type-`k` children that mutate to type `l`, with constant
/// subpopulation sizes `N_k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MutationCountTable {
    sizes: Vec<u64>,
    /// Full `K x K` table, diagonal holding the non-mutating counts `N_kk`.
    counts: Vec<Vec<u64>>,
}

impl MutationCountTable {
    /// `counts[k][l]` for `k != l`; diagonal entries of the input are ignored.
    pub fn new(sizes: Vec<u64>, counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = sizes.len();
        if k == 0 {
            return Err(Error::invalid("mutation.counts", "at least one type is required"));
        }
        if counts.len() != k || counts.iter().any(|r| r.len() != k) {
            return Err(Error::invalid("mutation.counts", format!("expected a {k} x {k} table")));
        }
        if let Some(t) = sizes.iter().position(|&n| n == 0) {
            return Err(Error::invalid(
                "population.sizes",
                format!("subpopulation {t} has size 0"),
            ));
        }
        let mut full = counts;
        let mut problems = Vec::new();
        for t in 0..k {
            let out: u64 = (0..k).filter(|&l| l != t).map(|l| full[t][l]).sum();
            let inflow: u64 = (0..k).filter(|&l| l != t).map(|l| full[l][t]).sum();
            if out > sizes[t] {
                problems.push(format!(
                    "type {t}: {out} mutants exceed subpopulation size {}",
                    sizes[t]
                ));
            }
            if out != inflow {
                problems.push(format!(
                    "type {t}: conservation fails ({out} mutate away, {inflow} mutate in)"
                ));
            }
        }
        if !problems.is_empty() {
            return Err(Error::invalid("mutation.counts", problems.join("; ")));
        }
        for t in 0..k {
            let out: u64 = (0..k).filter(|&l| l != t).map(|l| full[t][l]).sum();
            full[t][t] = sizes[t] - out;
        }
        Ok(MutationCountTable { sizes, counts: full })
    }

    /// The table without any mutation.
    pub fn none(sizes: Vec<u64>) -> Result<Self> {
        let k = sizes.len();
        Self::new(sizes, vec![vec![0; k]; k])
    }

    pub fn types(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[u64] {
        &self.sizes
    }

    pub fn size(&self, k: usize) -> u64 {
        self.sizes[k]
    }

    /// `N_kl`, with `N_kk` the number of type-`k` children that keep their type.
    pub fn count(&self, k: usize, l: usize) -> u64 {
        self.counts[k][l]
    }

    pub fn is_trivial(&self) -> bool {
        (0..self.types()).all(|k| self.counts[k][k] == self.sizes[k])
    }

    /// Backward mutation probability `m_kl = N_lk / N_k`: the fraction of
    /// type-`k` individuals after mutation that were born in subpopulation `l`.
    pub fn backward_rate<T: Scalar>(&self, k: usize, l: usize) -> T {
        T::from_ratio(self.counts[l][k], self.sizes[k])
    }

    pub fn backward_matrix<T: Scalar>(&self) -> Vec<Vec<T>> {
        let k = self.types();
        (0..k)
            .map(|a| (0..k).map(|b| self.backward_rate(a, b)).collect())
            .collect()
    }

    /// Probability that, among `n_k` distinct children sampled from
    /// subpopulation `k`, exactly `n[l]` mutate to type `l` for every `l != k`.
    /// `n[k]` is ignored; the non-mutating count is `n_k - sum_{l != k} n[l]`.
    /// Infeasible arguments give probability zero.
    pub fn hypergeometric_mutation_pmf<T: Scalar>(&self, k: usize, n_k: u64, n: &[u64]) -> T {
        if n.len() != self.types() || n_k > self.sizes[k] {
            return T::zero();
        }
        let moved: u64 = n.iter().enumerate().filter(|&(l, _)| l != k).map(|(_, &v)| v).sum();
        if moved > n_k {
            return T::zero();
        }
        let numerators: Vec<(u64, u64)> = (0..self.types())
            .map(|l| {
                let take = if l == k { n_k - moved } else { n[l] };
                (self.counts[k][l], take)
            })
            .collect();
        T::binomial_ratio(&numerators, (self.sizes[k], n_k))
    }
}

/// Row-stochastic mutation matrix `U = (u_kl)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MutationMatrix<T = f64> {
    rows: Vec<Vec<T>>,
}

impl<T: Scalar> MutationMatrix<T> {
    pub fn new(rows: Vec<Vec<T>>) -> Result<Self> {
        let k = rows.len();
        if k == 0 {
            return Err(Error::invalid("mutation.matrix", "at least one type is required"));
        }
        let mut problems = Vec::new();
        for (r, row) in rows.iter().enumerate() {
            if row.len() != k {
                problems.push(format!("row {r} has {} entries, expected {k}", row.len()));
                continue;
            }
            if let Some(c) = row.iter().position(|x| *x < T::zero() || !x.approx().is_finite()) {
                problems.push(format!("row {r}, column {c} is negative or not finite"));
            }
            let sum = T::sum_all(row.iter().cloned()).approx();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                problems.push(format!("row {r} sums to {sum}, expected 1"));
            }
        }
        if !problems.is_empty() {
            return Err(Error::invalid("mutation.matrix", problems.join("; ")));
        }
        Ok(MutationMatrix { rows })
    }

    pub fn identity(k: usize) -> Self {
        let rows = (0..k)
            .map(|a| (0..k).map(|b| if a == b { T::one() } else { T::zero() }).collect())
            .collect();
        MutationMatrix { rows }
    }

    /// Parent-independent mutation: every row equal to `target`.
    pub fn parent_independent(target: Vec<T>) -> Result<Self> {
        let k = target.len();
        Self::new(vec![target; k])
    }

    pub fn types(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, k: usize, l: usize) -> &T {
        &self.rows[k][l]
    }

    pub fn row(&self, k: usize) -> &[T] {
        &self.rows[k]
    }

    pub fn rows(&self) -> &[Vec<T>] {
        &self.rows
    }

    pub fn is_identity(&self) -> bool {
        (0..self.types()).all(|k| self.rows[k][k] == T::one())
    }

    pub fn to_f64(&self) -> MutationMatrix<f64> {
        MutationMatrix {
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().map(Scalar::approx).collect())
                .collect(),
        }
    }

    /// Converts an `f64` matrix into this scalar type.
    pub fn from_f64_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(
            rows.iter()
                .map(|r| r.iter().map(|&x| from_f64::<T>(x)).collect())
                .collect(),
        )
    }

    /// `P(M = j)` for `M ~ Mn(i_k, row k of U)`; zero unless `sum j = i_k`.
    pub fn multinomial_mutation_pmf(&self, k: usize, i_k: u64, j: &[u64]) -> T {
        if j.len() != self.types() || j.iter().sum::<u64>() != i_k {
            return T::zero();
        }
        T::multinomial_pmf(&self.rows[k], j)
    }

    /// Draws the types of `count` children of type-`k` parents after mutation.
    pub fn sample_mutation<R: Rng + ?Sized>(&self, k: usize, count: u64, rng: &mut R) -> Vec<u64> {
        let probs: Vec<f64> = self.rows[k].iter().map(Scalar::approx).collect();
        sample_multinomial(count, &probs, rng)
    }
}

/// Multinomial draw by sequential conditional binomials.
pub fn sample_multinomial<R: Rng + ?Sized>(n: u64, probs: &[f64], rng: &mut R) -> Vec<u64> {
    let mut out = vec![0u64; probs.len()];
    let mut left = n;
    let mut mass = 1.0f64;
    for (slot, &p) in out.iter_mut().zip(probs) {
        if left == 0 {
            break;
        }
        if mass <= 0.0 {
            break;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        let draw = if q >= 1.0 {
            left
        } else {
            Binomial::new(left, q).expect("valid binomial").sample(rng)
        };
        *slot = draw;
        left -= draw;
        mass -= p;
    }
    // Rounding can leave a remainder; it belongs to the last positive category.
    if left > 0 {
        if let Some(last) = probs.iter().rposition(|&p| p > 0.0) {
            out[last] += left;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combinatorics::for_each_composition;
    use num_rational::BigRational;

    type Q = BigRational;

    #[test]
    fn backward_rates() {
        let t = MutationCountTable::new(vec![100, 50], vec![vec![0, 5], vec![5, 0]]).unwrap();
        assert_eq!(t.backward_rate::<f64>(0, 1), 0.05);
        let t = MutationCountTable::new(vec![10, 10], vec![vec![0, 2], vec![2, 0]]).unwrap();
        assert_eq!(t.backward_rate::<f64>(0, 0), 0.8);
        let z = MutationCountTable::none(vec![3, 4]).unwrap();
        assert_eq!(z.backward_rate::<f64>(1, 1), 1.0);
        assert_eq!(z.backward_rate::<f64>(1, 0), 0.0);
        for row in t.backward_matrix::<Q>() {
            assert_eq!(row.into_iter().fold(Q::from_count(0), |a, b| a + b), Q::from_count(1));
        }
    }

    #[test]
    fn conservation_violation_names_type() {
        let err = MutationCountTable::new(vec![10, 10], vec![vec![0, 3], vec![1, 0]]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("type 0") && msg.contains("conservation"), "{msg}");
        assert!(MutationCountTable::new(vec![2, 10], vec![vec![0, 3], vec![3, 0]]).is_err());
    }

    /// Enumerates all `C(N_k, n_k)` subsets of a subpopulation laid out as
    /// consecutive groups of sizes `N_kl`.
    fn hypergeometric_brute(groups: &[u64], n_k: usize, want: &[u64]) -> Q {
        let labels: Vec<usize> = groups
            .iter()
            .enumerate()
            .flat_map(|(l, &g)| std::iter::repeat_n(l, g as usize))
            .collect();
        let total = labels.len();
        let (mut hits, mut all) = (0u64, 0u64);
        for mask in 0u32..(1 << total) {
            if mask.count_ones() as usize != n_k {
                continue;
            }
            all += 1;
            let mut got = vec![0u64; groups.len()];
            for (pos, &l) in labels.iter().enumerate() {
                if mask >> pos & 1 == 1 {
                    got[l] += 1;
                }
            }
            if got == want {
                hits += 1;
            }
        }
        Q::from_ratio(hits, all)
    }

    #[test]
    fn hypergeometric_examples() {
        let t = MutationCountTable::new(vec![4, 4], vec![vec![0, 1], vec![1, 0]]).unwrap();
        assert_eq!(t.hypergeometric_mutation_pmf::<Q>(0, 2, &[0, 1]), Q::from_ratio(1, 2));
        assert_eq!(hypergeometric_brute(&[3, 1], 2, &[1, 1]), Q::from_ratio(1, 2));
        assert_eq!(t.hypergeometric_mutation_pmf::<f64>(0, 2, &[0, 2]), 0.0);
        let z = MutationCountTable::none(vec![4, 4]).unwrap();
        assert_eq!(z.hypergeometric_mutation_pmf::<f64>(0, 3, &[0, 0]), 1.0);
    }

    #[test]
    fn hypergeometric_sums_to_one_and_matches_subsets() {
        let t = MutationCountTable::new(vec![7, 6, 5], vec![vec![0, 2, 1], vec![1, 0, 1], vec![2, 0, 0]]).unwrap();
        for k in 0..3 {
            let groups: Vec<u64> = (0..3).map(|l| t.count(k, l)).collect();
            for n_k in 0..=t.size(k) {
                let mut total = Q::from_count(0);
                for_each_composition(n_k, 3, |c| {
                    let mut n = c.to_vec();
                    n[k] = 0;
                    let p = t.hypergeometric_mutation_pmf::<Q>(k, n_k, &n);
                    if n_k <= 5 {
                        assert_eq!(p, hypergeometric_brute(&groups, n_k as usize, c));
                    }
                    total = total.clone() + p;
                });
                assert_eq!(total, Q::from_count(1), "k={k} n_k={n_k}");
            }
        }
    }

    #[test]
    fn multinomial_pmf() {
        let id = MutationMatrix::<f64>::identity(2);
        assert_eq!(id.multinomial_mutation_pmf(0, 3, &[3, 0]), 1.0);
        let half = MutationMatrix::new(vec![vec![0.5, 0.5], vec![0.0, 1.0]]).unwrap();
        assert_eq!(half.multinomial_mutation_pmf(0, 2, &[1, 1]), 0.5);
        assert_eq!(half.multinomial_mutation_pmf(0, 2, &[1, 2]), 0.0);
        let u = MutationMatrix::<Q>::new(vec![
            vec![Q::from_ratio(1, 2), Q::from_ratio(1, 3), Q::from_ratio(1, 6)],
            vec![Q::from_ratio(1, 4), Q::from_ratio(1, 4), Q::from_ratio(1, 2)],
            vec![Q::from_count(0), Q::from_count(0), Q::from_count(1)],
        ])
        .unwrap();
        for k in 0..3 {
            for i_k in 0..=10 {
                let mut total = Q::from_count(0);
                for_each_composition(i_k, 3, |j| {
                    total = total.clone() + u.multinomial_mutation_pmf(k, i_k, j);
                });
                assert_eq!(total, Q::from_count(1));
            }
        }
    }

    #[test]
    fn row_validation_reports_row() {
        let err = MutationMatrix::new(vec![vec![0.5, 0.4], vec![0.0, 1.0]]).unwrap_err();
        assert!(err.to_string().contains("row 0"), "{err}");
    }

    #[test]
    fn multinomial_sampler_conserves_count() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let d = sample_multinomial(17, &[0.2, 0.0, 0.5, 0.3], &mut rng);
            assert_eq!(d.iter().sum::<u64>(), 17);
            assert_eq!(d[1], 0);
        }
    }
}

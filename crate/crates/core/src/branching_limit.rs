//! The multi-type Galton-Watson limit of the forward model when the last type is
//! dominant (`u_KK = 1`): the offspring law of `Y_k`, its moments, simulation and
//! finite-`N` comparisons.
//!
//! GW states live in `N_0^L` with `L = K - 1`; the type-`K` coordinate is dropped.

use std::collections::BTreeMap;

use rand::Rng;

use crate::combinatorics::for_each_composition;
use crate::error::{Error, Result};
use crate::forward_variable::{CountLaw, VariableModel};
use crate::mutation::{sample_multinomial, MutationMatrix};
use crate::offspring::LimitOffspringLaw;
use crate::scalar::{factorial, falling_real, pow, Real};

#[derive(Clone, Debug)]
pub struct BranchingOffspringLaw<F = f64> {
    xi: LimitOffspringLaw,
    mutation: MutationMatrix<F>,
}

impl<F: Real> BranchingOffspringLaw<F> {
    /// Fails with a model error unless `K >= 2` and `u_KK = 1`.
    pub fn new(xi: LimitOffspringLaw, mutation: MutationMatrix<F>) -> Result<Self> {
        let k = mutation.types();
        if k < 2 {
            return Err(Error::Model("the branching limit needs at least two types".into()));
        }
        let last = mutation.get(k - 1, k - 1).approx();
        if (last - 1.0).abs() > crate::mutation::ROW_SUM_TOL {
            return Err(Error::Model(format!(
                "u_KK = {last} < 1: the last type keeps feeding the first L types and the \
                 counts do not converge"
            )));
        }
        Ok(BranchingOffspringLaw { xi, mutation })
    }

    pub fn xi(&self) -> LimitOffspringLaw {
        self.xi
    }

    pub fn mutation(&self) -> &MutationMatrix<F> {
        &self.mutation
    }

    /// Number of GW types `L = K - 1`.
    pub fn types(&self) -> usize {
        self.mutation.types() - 1
    }

    fn check_parent(&self, k: usize, j: &[u64]) -> Result<()> {
        if k >= self.types() || j.len() != self.types() {
            return Err(Error::domain(format!(
                "parent type {k} and vector of length {} for L = {}",
                j.len(),
                self.types()
            )));
        }
        Ok(())
    }

    fn thinning_weight(&self, k: usize, j: &[u64]) -> F {
        let mut w = F::one();
        for (l, &x) in j.iter().enumerate() {
            w = w * pow(self.mutation.get(k, l), x) / factorial::<F>(x);
        }
        w
    }

    fn escape(&self, k: usize) -> F {
        *self.mutation.get(k, self.types())
    }

    /// `P(Y_k = j) = E[(xi)_{|j|} u_kK^(xi - |j|)] prod_l u_kl^j_l / j_l!`.
    pub fn yk_pmf(&self, k: usize, j: &[u64]) -> Result<F> {
        self.check_parent(k, j)?;
        let total: u64 = j.iter().sum();
        Ok(self.xi.mixed_factorial_moment(total, self.escape(k)) * self.thinning_weight(k, j))
    }

    /// `E[prod_l (Y_kl)_{m_l}] = E[(xi)_{|m|}] prod_l u_kl^m_l`.
    pub fn yk_factorial_moment(&self, k: usize, m: &[u64]) -> Result<F> {
        self.check_parent(k, m)?;
        let total: u64 = m.iter().sum();
        let mut out = self.xi.factorial_moment::<F>(total);
        for (l, &x) in m.iter().enumerate() {
            out = out * pow(self.mutation.get(k, l), x);
        }
        Ok(out)
    }

    /// `Cov(Y_kl1, Y_kl2) = (E[(xi)_2] - E[xi]^2) u_kl1 u_kl2` for `l1 != l2`.
    pub fn yk_covariance(&self, k: usize, l1: usize, l2: usize) -> Result<F> {
        let l = self.types();
        if k >= l || l1 >= l || l2 >= l || l1 == l2 {
            return Err(Error::domain("covariance needs distinct GW types l1, l2"));
        }
        let mean = self.xi.mean::<F>();
        Ok((self.xi.factorial_moment::<F>(2) - mean * mean) * *self.mutation.get(k, l1) * *self.mutation.get(k, l2))
    }

    /// Sparse law of the thinned sum when `xi` is replaced by a count with pmf
    /// `count_pmf` (on `0..len`).
    fn thinned_law(&self, k: usize, count_pmf: &[F]) -> CountLaw<F> {
        let escape = self.escape(k);
        let mut out = CountLaw::new();
        let max = count_pmf.len().saturating_sub(1) as u64;
        for total in 0..=max {
            let mixed = F::sum_all(count_pmf.iter().enumerate().skip(total as usize).map(|(s, p)| {
                let s = s as u64;
                *p * falling_real(F::from_count(s), total) * pow(&escape, s - total)
            }));
            if mixed.is_zero() {
                continue;
            }
            for_each_composition(total, self.types(), |j| {
                let p = mixed * self.thinning_weight(k, j);
                if !p.is_zero() {
                    out.insert(j.to_vec(), p);
                }
            });
        }
        out
    }

    /// Sparse law of `Y_k` (mass beyond the truncated `xi` support is dropped).
    pub fn yk_law(&self, k: usize) -> Result<CountLaw<F>> {
        self.check_parent(k, &vec![0; self.types()])?;
        Ok(self.thinned_law(k, &self.xi.truncated_pmf::<F>()))
    }

    /// Law of `Y_k^{*n}` obtained by thinning `xi^{*n}` (the sum of `n` offspring
    /// counts) through row `k` of `U`.
    pub fn yk_convolution_law(&self, k: usize, n: u64) -> Result<CountLaw<F>> {
        self.check_parent(k, &vec![0; self.types()])?;
        let base = self.xi.truncated_pmf::<F>();
        let mut pmf = vec![F::one()];
        for _ in 0..n {
            pmf = convolve_pmf(&pmf, &base);
        }
        Ok(self.thinned_law(k, &pmf))
    }

    /// One-step law of the GW process from `i`: `Y_1^{*i_1} * ... * Y_L^{*i_L}`.
    pub fn limit_transition_law(&self, i: &[u64]) -> Result<CountLaw<F>> {
        if i.len() != self.types() {
            return Err(Error::domain("GW state must have L entries"));
        }
        let mut acc = CountLaw::new();
        acc.insert(vec![0; self.types()], F::one());
        for (k, &ik) in i.iter().enumerate() {
            if ik > 0 {
                acc = convolve_laws(&acc, &self.yk_convolution_law(k, ik)?);
            }
        }
        Ok(acc)
    }

    /// One generation: every type-`k` individual draws `xi` children, each landing
    /// in type `l` with probability `u_kl`; children of type `K` are dropped.
    pub fn step<R: Rng + ?Sized>(&self, state: &[u64], rng: &mut R) -> Vec<u64> {
        let l = self.types();
        let mut next = vec![0u64; l];
        for (k, &count) in state.iter().enumerate() {
            let probs: Vec<f64> = self.mutation.row(k).iter().map(|p| p.approx()).collect();
            for _ in 0..count {
                let children = self.xi.sample(rng);
                if children == 0 {
                    continue;
                }
                let split = sample_multinomial(children, &probs, rng);
                for (slot, x) in next.iter_mut().zip(&split[..l]) {
                    *slot += x;
                }
            }
        }
        next
    }

    /// Path of the GW process; stops with a truncation error once the total
    /// population exceeds `cap`.
    pub fn simulate_gw<R: Rng + ?Sized>(
        &self,
        initial: &[u64],
        horizon: usize,
        cap: u64,
        rng: &mut R,
    ) -> Result<Vec<Vec<u64>>> {
        if initial.len() != self.types() {
            return Err(Error::domain("GW state must have L entries"));
        }
        let mut path = vec![initial.to_vec()];
        for generation in 1..=horizon {
            let next = self.step(path.last().expect("non-empty"), rng);
            let size: u64 = next.iter().sum();
            if size > cap {
                return Err(Error::Truncation { size, cap, generation });
            }
            path.push(next);
        }
        Ok(path)
    }
}

fn convolve_pmf<F: Real>(a: &[F], b: &[F]) -> Vec<F> {
    let mut out = vec![F::zero(); a.len() + b.len() - 1];
    for (x, pa) in a.iter().enumerate() {
        for (y, pb) in b.iter().enumerate() {
            out[x + y] = out[x + y] + *pa * *pb;
        }
    }
    // Drop the far tail so repeated convolution of unbounded laws stays small.
    let tail = F::from_f64(1e-300).expect("finite");
    while out.len() > 1 && *out.last().expect("non-empty") < tail {
        out.pop();
    }
    out
}

fn convolve_laws<F: Real>(a: &CountLaw<F>, b: &CountLaw<F>) -> CountLaw<F> {
    let mut out = CountLaw::new();
    for (x, pa) in a {
        for (y, pb) in b {
            let key: Vec<u64> = x.iter().zip(y).map(|(u, v)| u + v).collect();
            let slot = out.entry(key).or_insert_with(F::zero);
            *slot = *slot + *pa * *pb;
        }
    }
    out
}

/// Finite-`N` versus limit comparison of the one-step law from a GW state `i`.
#[derive(Clone, Debug)]
pub struct GwComparison {
    pub n: u64,
    pub i: Vec<u64>,
    /// `(j, p_finite, p_limit)` over the union of both supports, ordered by `j`.
    pub rows: Vec<(Vec<u64>, f64, f64)>,
    /// Total variation distance, counting limit mass lost to truncation.
    pub total_variation: f64,
}

impl GwComparison {
    pub fn probability(&self, j: &[u64]) -> (f64, f64) {
        self.rows
            .iter()
            .find(|(x, _, _)| x == j)
            .map(|(_, a, b)| (*a, *b))
            .unwrap_or((0.0, 0.0))
    }
}

/// Compares `P_N(X_1 = j | X_0 = (i, N - |i|))` on the first `L` coordinates with
/// the GW limit for each `N` in `ns`. `family(N)` builds the finite model.
pub fn gw_convergence_table<Fam>(
    family: Fam,
    limit: &BranchingOffspringLaw<f64>,
    i: &[u64],
    ns: &[u64],
) -> Result<Vec<GwComparison>>
where
    Fam: Fn(u64) -> Result<VariableModel<f64>>,
{
    let l = limit.types();
    let limit_law = limit.limit_transition_law(i)?;
    let limit_mass: f64 = limit_law.values().sum();
    let occupied: u64 = i.iter().sum();
    let mut out = Vec::new();
    for &n in ns {
        let model = family(n)?;
        if model.types() != l + 1 || model.size() != n {
            return Err(Error::StateSpaceMismatch(format!(
                "model at N = {n} has size {} and {} types",
                model.size(),
                model.types()
            )));
        }
        if occupied > n {
            return Err(Error::domain(format!("|i| = {occupied} exceeds N = {n}")));
        }
        let mut start = i.to_vec();
        start.push(n - occupied);
        let mut finite: BTreeMap<Vec<u64>, f64> = BTreeMap::new();
        for (j, p) in model.transition_law(&start)? {
            *finite.entry(j[..l].to_vec()).or_default() += p;
        }
        let mut keys: Vec<Vec<u64>> = finite.keys().chain(limit_law.keys()).cloned().collect();
        keys.sort();
        keys.dedup();
        let mut tv = 0.0;
        let rows: Vec<_> = keys
            .into_iter()
            .map(|j| {
                let a = finite.get(&j).copied().unwrap_or(0.0);
                let b = limit_law.get(&j).copied().unwrap_or(0.0);
                tv += (a - b).abs();
                (j, a, b)
            })
            .collect();
        out.push(GwComparison {
            n,
            i: i.to_vec(),
            rows,
            total_variation: 0.5 * (tv + (1.0 - limit_mass).max(0.0)),
        });
    }
    Ok(out)
}

/// `E[X_1(1) | X_0 = (i, N - |i|)]` on the first `L` coordinates for each `N`:
/// `sum_k u_kl i_k + u_Kl (N - |i|)`. Without `u_KK = 1` this grows linearly in `N`.
pub fn gw_failure_diagnostic(mutation: &MutationMatrix<f64>, i: &[u64], ns: &[u64]) -> Result<Vec<(u64, Vec<f64>)>> {
    let k_types = mutation.types();
    if k_types < 2 || i.len() != k_types - 1 {
        return Err(Error::domain("failure diagnostic needs K >= 2 and i of length K - 1"));
    }
    let occupied: u64 = i.iter().sum();
    ns.iter()
        .map(|&n| {
            if occupied > n {
                return Err(Error::domain(format!("|i| = {occupied} exceeds N = {n}")));
            }
            let mean = (0..k_types - 1)
                .map(|l| {
                    let inside: f64 = i.iter().enumerate().map(|(k, &x)| mutation.get(k, l) * x as f64).sum();
                    inside + mutation.get(k_types - 1, l) * (n - occupied) as f64
                })
                .collect();
            Ok((n, mean))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::offspring::OffspringLaw;
    use rand::SeedableRng;

    fn two_type(u11: f64) -> MutationMatrix<f64> {
        MutationMatrix::new(vec![vec![u11, 1.0 - u11], vec![0.0, 1.0]]).unwrap()
    }

    #[test]
    fn requires_dominant_last_type() {
        let u = MutationMatrix::new(vec![vec![0.5, 0.5], vec![0.1, 0.9]]).unwrap();
        assert!(matches!(
            BranchingOffspringLaw::new(LimitOffspringLaw::Poisson, u),
            Err(Error::Model(_))
        ));
    }

    #[test]
    fn poisson_thinning() {
        let u = MutationMatrix::new(vec![vec![0.5, 0.2, 0.3], vec![0.1, 0.6, 0.3], vec![0.0, 0.0, 1.0]]).unwrap();
        let law = BranchingOffspringLaw::new(LimitOffspringLaw::Poisson, u).unwrap();
        let pois = |lambda: f64, x: u64| (-lambda).exp() * lambda.powi(x as i32) / factorial::<f64>(x);
        for a in 0..5 {
            for b in 0..5 {
                let p = law.yk_pmf(0, &[a, b]).unwrap();
                assert!((p - pois(0.5, a) * pois(0.2, b)).abs() < 1e-14);
            }
        }
        assert!(law.yk_covariance(1, 0, 1).unwrap().abs() < 1e-15);
    }

    #[test]
    fn no_mutation_copies_xi() {
        let law =
            BranchingOffspringLaw::new(LimitOffspringLaw::Binomial { c: 3 }, MutationMatrix::identity(2)).unwrap();
        for x in 0..4 {
            let p: f64 = law.yk_pmf(0, &[x]).unwrap();
            assert!((p - LimitOffspringLaw::Binomial { c: 3 }.pmf::<f64>(x)).abs() < 1e-15);
        }
    }

    #[test]
    fn extinction_and_constant_paths() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let dead = BranchingOffspringLaw::new(LimitOffspringLaw::PointMass { value: 0 }, two_type(0.7)).unwrap();
        assert_eq!(dead.simulate_gw(&[5], 3, 100, &mut rng).unwrap()[1], vec![0]);
        let still =
            BranchingOffspringLaw::<f64>::new(LimitOffspringLaw::PointMass { value: 1 }, MutationMatrix::identity(2))
                .unwrap();
        let path = still.simulate_gw(&[4], 6, 100, &mut rng).unwrap();
        assert!(path.iter().all(|s| s == &vec![4]));
    }

    #[test]
    fn truncation_is_reported() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let grow =
            BranchingOffspringLaw::<f64>::new(LimitOffspringLaw::PointMass { value: 3 }, MutationMatrix::identity(2))
                .unwrap();
        let err = grow.simulate_gw(&[1], 10, 50, &mut rng).unwrap_err();
        assert_eq!(
            err,
            Error::Truncation {
                size: 81,
                cap: 50,
                generation: 4
            }
        );
    }

    #[test]
    fn empty_start_has_no_error() {
        let limit = BranchingOffspringLaw::new(LimitOffspringLaw::Poisson, two_type(0.6)).unwrap();
        let table = gw_convergence_table(
            |n| Ok(VariableModel::new(OffspringLaw::wright_fisher(n)?, two_type(0.6))),
            &limit,
            &[0],
            &[10, 20],
        )
        .unwrap();
        for row in table {
            assert!(row.total_variation < 1e-12);
            assert_eq!(row.probability(&[0]), (1.0, 1.0));
        }
    }

    #[test]
    fn failure_mean_grows_linearly() {
        let u = MutationMatrix::new(vec![vec![0.8, 0.2], vec![0.1, 0.9]]).unwrap();
        let rows = gw_failure_diagnostic(&u, &[2], &[100, 200]).unwrap();
        assert!((rows[1].1[0] - rows[0].1[0] - 10.0).abs() < 1e-9);
        let rows = gw_failure_diagnostic(&two_type(0.8), &[2], &[100, 200]).unwrap();
        assert_eq!(rows[0].1, rows[1].1);
    }
}

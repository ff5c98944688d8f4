//! Merger rates of a Xi-coalescent whose measure is a Kingman mass plus finitely
//! many atoms on the simplex.

use std::collections::HashMap;

use crate::combinatorics::for_each_integer_partition;
use crate::error::{Error, Result};
use crate::scalar::{factorial, pow, Real};

/// Tolerance for `sum x <= 1` on atom locations.
pub const SIMPLEX_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct XiAtom<F = f64> {
    /// Non-increasing positive frequencies with total at most one.
    pub x: Vec<F>,
    pub weight: F,
}

/// `Xi = a * delta_0 + sum_r w_r * delta_{x_r}`.
#[derive(Clone, Debug, PartialEq)]
pub struct XiMeasure<F = f64> {
    kingman: F,
    atoms: Vec<XiAtom<F>>,
}

impl<F: Real> XiMeasure<F> {
    pub fn new(kingman: F, atoms: Vec<XiAtom<F>>) -> Result<Self> {
        if !(kingman.is_finite() && kingman >= F::zero()) {
            return Err(Error::invalid("xi", "Kingman mass must be finite and non-negative"));
        }
        let tol = F::from_f64(SIMPLEX_TOL).expect("finite");
        for (r, atom) in atoms.iter().enumerate() {
            let bad = |msg: &str| Err(Error::invalid("xi.atoms", format!("atom {r}: {msg}")));
            if atom.x.is_empty() {
                return bad("location is empty");
            }
            if !(atom.weight.is_finite() && atom.weight > F::zero()) {
                return bad("weight must be positive and finite");
            }
            if atom.x.iter().any(|&v| !(v.is_finite() && v > F::zero())) {
                return bad("frequencies must be positive");
            }
            if atom.x.windows(2).any(|w| w[0] < w[1]) {
                return bad("frequencies must be non-increasing");
            }
            if F::sum_all(atom.x.iter().copied()) > F::one() + tol {
                return bad("frequencies sum to more than one");
            }
        }
        Ok(XiMeasure { kingman, atoms })
    }

    /// Kingman coalescent with pair-merger rate `mass`.
    pub fn kingman(mass: F) -> Result<Self> {
        Self::new(mass, Vec::new())
    }

    /// The zero measure: no mergers at all.
    pub fn zero() -> Self {
        XiMeasure {
            kingman: F::zero(),
            atoms: Vec::new(),
        }
    }

    pub fn kingman_mass(&self) -> F {
        self.kingman
    }

    pub fn atoms(&self) -> &[XiAtom<F>] {
        &self.atoms
    }

    pub fn is_zero(&self) -> bool {
        self.kingman == F::zero() && self.atoms.is_empty()
    }

    /// `phi_j(i_1..i_j)` for all `i_r >= 2`.
    pub fn rate(&self, counts: &[u64]) -> Result<F> {
        if counts.is_empty() || counts.iter().any(|&i| i < 2) {
            return Err(Error::domain("xi_rate needs counts that are all at least 2"));
        }
        Ok(self.rate_unchecked(counts))
    }

    fn rate_unchecked(&self, counts: &[u64]) -> F {
        let mut total = if counts == [2] { self.kingman } else { F::zero() };
        for atom in &self.atoms {
            let norm = F::sum_all(atom.x.iter().map(|&v| v * v));
            total = total + atom.weight / norm * injective_power_sum(&atom.x, counts);
        }
        total
    }

    /// `phi_j` for counts that may contain ones. Mixed arguments use the
    /// consistency recursion; all-ones arguments give the negative total merger
    /// rate of `j` lineages.
    pub fn rate_extended(&self, counts: &[u64]) -> Result<F> {
        if counts.contains(&0) {
            return Err(Error::domain("rate counts must be positive"));
        }
        let mut memo = HashMap::new();
        Ok(self.extended(&canonical(counts), &mut memo))
    }

    fn extended(&self, counts: &[u64], memo: &mut HashMap<Vec<u64>, F>) -> F {
        if let Some(v) = memo.get(counts) {
            return *v;
        }
        let j = counts.len();
        let value = if counts.iter().all(|&i| i == 1) {
            if j <= 1 {
                F::zero()
            } else {
                -self.total_merger_rate(j as u64, memo)
            }
        } else if counts.iter().all(|&i| i >= 2) {
            self.rate_unchecked(counts)
        } else {
            // phi_{j}(a, 1) = phi_{j-1}(a) - sum_m phi_{j-1}(a + e_m)
            let a = &counts[..j - 1];
            let mut v = self.extended(a, memo);
            for m in 0..a.len() {
                let mut bumped = a.to_vec();
                bumped[m] += 1;
                v = v - self.extended(&canonical(&bumped), memo);
            }
            v
        };
        memo.insert(counts.to_vec(), value);
        value
    }

    /// Sum over all non-trivial set partitions of `j` lineages of the rate of that merger.
    fn total_merger_rate(&self, j: u64, memo: &mut HashMap<Vec<u64>, F>) -> F {
        let mut shapes = Vec::new();
        for_each_integer_partition(j, |parts| {
            if parts.len() < j as usize {
                shapes.push(parts.to_vec());
            }
        });
        let mut total = F::zero();
        for shape in shapes {
            // Number of set partitions of {1..j} with these block sizes.
            let mut count = factorial::<F>(j);
            let mut mult: HashMap<u64, u64> = HashMap::new();
            for &p in &shape {
                count = count / factorial::<F>(p);
                *mult.entry(p).or_default() += 1;
            }
            for &m in mult.values() {
                count = count / factorial::<F>(m);
            }
            total = total + count * self.extended(&shape, memo);
        }
        total
    }
}

/// Non-increasing order; every rate is symmetric in its arguments.
fn canonical(counts: &[u64]) -> Vec<u64> {
    let mut v = counts.to_vec();
    v.sort_unstable_by(|a, b| b.cmp(a));
    v
}

/// `sum over pairwise distinct indices m_1..m_j of prod_r x_{m_r}^{i_r}`.
fn injective_power_sum<F: Real>(x: &[F], counts: &[u64]) -> F {
    fn rec<F: Real>(x: &[F], counts: &[u64], r: usize, used: &mut [bool]) -> F {
        if r == counts.len() {
            return F::one();
        }
        let mut acc = F::zero();
        for m in 0..x.len() {
            if used[m] {
                continue;
            }
            used[m] = true;
            acc = acc + pow(&x[m], counts[r]) * rec(x, counts, r + 1, used);
            used[m] = false;
        }
        acc
    }
    if counts.len() > x.len() {
        return F::zero();
    }
    let mut used = vec![false; x.len()];
    rec(x, counts, 0, &mut used)
}

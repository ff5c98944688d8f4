//! Brute-force oracles shared by the integration tests. Each one enumerates the
//! underlying random experiment directly instead of using the closed forms or
//! contingency-table sums of the library.

#![allow(dead_code)]

use std::collections::BTreeMap;

use cannings::scalar::{factorial, falling, pow};
use cannings::{MutationCountTable, OffspringLaw, Rational, Scalar, TypedPartition, VariableModel};

pub fn q(a: i64, b: i64) -> Rational {
    Rational::new(a.into(), b.into())
}

/// Every vector in `N_0^parts` summing to `total`.
pub fn compositions(total: u64, parts: usize) -> Vec<Vec<u64>> {
    if parts == 0 {
        return if total == 0 { vec![Vec::new()] } else { Vec::new() };
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Ordered offspring vectors with positive probability.
pub fn outcomes<T: Scalar>(law: &OffspringLaw<T>) -> Vec<(Vec<u64>, T)> {
    let n = law.size();
    compositions(n, n as usize)
        .into_iter()
        .filter_map(|nu| {
            let p = law.outcome_probability(&nu);
            (!p.is_zero()).then_some((nu, p))
        })
        .collect()
}

/// Injective maps from `0..m` into `0..n`.
pub fn injections(m: usize, n: usize) -> Vec<Vec<usize>> {
    fn rec(m: usize, n: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == m {
            out.push(cur.clone());
            return;
        }
        for v in 0..n {
            if !cur.contains(&v) {
                cur.push(v);
                rec(m, n, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(m, n, &mut Vec::new(), &mut out);
    out
}

fn parent_of(nu: &[u64], slot: u64) -> usize {
    let mut acc = 0;
    for (p, &v) in nu.iter().enumerate() {
        acc += v;
        if slot < acc {
            return p;
        }
    }
    unreachable!("slot beyond the offspring total")
}

/// `Phi_j(k)` as `(N)_j / (N)_k * E[prod_r (nu_r)_{k_r}]` over all ordered outcomes.
pub fn phi_oracle<T: Scalar>(law: &OffspringLaw<T>, counts: &[u64]) -> T {
    let n = law.size();
    let k: u64 = counts.iter().sum();
    let mut acc = T::zero();
    for (nu, p) in outcomes(law) {
        let mut term = p;
        for (r, &kr) in counts.iter().enumerate() {
            term = term * falling::<T>(nu[r], kr);
        }
        acc = acc + term;
    }
    acc * falling::<T>(n, counts.len() as u64) / falling::<T>(n, k)
}

/// One generation of the fixed-size model from `from`, enumerated over labelled
/// worlds: which post-mutation individual each block sits on, where that
/// individual was born, every ordered offspring vector per subpopulation and
/// every relabelling of the children within a subpopulation.
pub fn fixed_step_oracle(
    laws: &[OffspringLaw<Rational>],
    table: &MutationCountTable,
    from: &TypedPartition,
) -> BTreeMap<TypedPartition, Rational> {
    let k_types = laws.len();
    // Post-mutation individual `idx` of type k: origin subpopulation and child slot there.
    let mut identity: Vec<Vec<(usize, u64)>> = vec![Vec::new(); k_types];
    let mut next_slot = vec![0u64; k_types];
    for (k, ident) in identity.iter_mut().enumerate() {
        for (l, slot) in next_slot.iter_mut().enumerate() {
            for _ in 0..table.count(l, k) {
                ident.push((l, *slot));
                *slot += 1;
            }
        }
    }
    let by_type: Vec<Vec<u64>> = (0..k_types)
        .map(|k| from.blocks().iter().filter(|b| b.1 == k).map(|b| b.0).collect())
        .collect();
    let placements: Vec<Vec<Vec<usize>>> = (0..k_types)
        .map(|k| injections(by_type[k].len(), table.size(k) as usize))
        .collect();
    let offspring: Vec<Vec<(Vec<u64>, Rational)>> = laws.iter().map(outcomes).collect();
    let relabel: Vec<Vec<Vec<usize>>> = (0..k_types)
        .map(|k| injections(table.size(k) as usize, table.size(k) as usize))
        .collect();

    let mut out = BTreeMap::new();
    let mut place_choice = vec![0usize; k_types];
    let mut nu_choice = vec![0usize; k_types];
    let mut perm_choice = vec![0usize; k_types];
    loop {
        let mut weight = q(1, 1);
        for k in 0..k_types {
            weight /= falling::<Rational>(table.size(k), by_type[k].len() as u64);
            weight /= Rational::from_count(relabel[k].len() as u64);
            weight *= offspring[k][nu_choice[k]].1.clone();
        }
        let mut merged: BTreeMap<(usize, usize), u64> = BTreeMap::new();
        for k in 0..k_types {
            for (b, &ind) in placements[k][place_choice[k]].iter().enumerate() {
                let (origin, slot) = identity[k][ind];
                let slot = relabel[origin][perm_choice[origin]][slot as usize] as u64;
                let parent = parent_of(&offspring[origin][nu_choice[origin]].0, slot);
                *merged.entry((origin, parent)).or_default() |= by_type[k][b];
            }
        }
        let blocks = merged.into_iter().map(|((l, _), mask)| (mask, l)).collect();
        let to = TypedPartition::new(from.n(), blocks).unwrap();
        *out.entry(to).or_insert_with(|| q(0, 1)) += weight;

        // Odometer over (placements, offspring vectors, relabellings).
        let dials: [(&mut Vec<usize>, Vec<usize>); 3] = [
            (&mut place_choice, placements.iter().map(Vec::len).collect()),
            (&mut nu_choice, offspring.iter().map(Vec::len).collect()),
            (&mut perm_choice, relabel.iter().map(Vec::len).collect()),
        ];
        if !advance(dials) {
            return out;
        }
    }
}

fn advance(dials: [(&mut Vec<usize>, Vec<usize>); 3]) -> bool {
    for (choice, limits) in dials {
        for (c, &limit) in choice.iter_mut().zip(&limits) {
            *c += 1;
            if *c < limit {
                return true;
            }
            *c = 0;
        }
    }
    false
}

/// Row `i` of the forward transition matrix: every ordered offspring vector, then
/// each child mutating on its own, accumulated child by child.
pub fn forward_row_oracle<T: Scalar>(model: &VariableModel<T>, i: &[u64]) -> BTreeMap<Vec<u64>, T> {
    let k_types = model.types();
    let mut out: BTreeMap<Vec<u64>, T> = BTreeMap::new();
    for (nu, p) in outcomes(model.law()) {
        let mut parent_type = Vec::new();
        for (k, &ik) in i.iter().enumerate() {
            parent_type.extend(std::iter::repeat_n(k, ik as usize));
        }
        let mut dist: BTreeMap<Vec<u64>, T> = BTreeMap::new();
        dist.insert(vec![0; k_types], p);
        for (parent, &children) in nu.iter().enumerate() {
            for _ in 0..children {
                let k = parent_type[parent];
                let mut next = BTreeMap::new();
                for (state, w) in &dist {
                    for l in 0..k_types {
                        let u = model.mutation().get(k, l);
                        if u.is_zero() {
                            continue;
                        }
                        let mut s = state.clone();
                        s[l] += 1;
                        let slot = next.entry(s).or_insert_with(T::zero);
                        *slot = slot.clone() + w.clone() * u.clone();
                    }
                }
                dist = next;
            }
        }
        for (j, w) in dist {
            let slot = out.entry(j).or_insert_with(T::zero);
            *slot = slot.clone() + w;
        }
    }
    out
}

/// Non-negative `rows x cols` matrices (row-major) with the given column sums.
pub fn matrices_with_col_sums(rows: usize, cols: &[u64]) -> Vec<Vec<u64>> {
    let mut out = vec![vec![0u64; rows * cols.len()]];
    for (c, &total) in cols.iter().enumerate() {
        let mut next = Vec::new();
        for m in &out {
            for col in compositions(total, rows) {
                let mut m = m.clone();
                for (r, v) in col.into_iter().enumerate() {
                    m[r * cols.len() + c] = v;
                }
                next.push(m);
            }
        }
        out = next;
    }
    out
}

/// Kimura forward entry
/// `C(cN, N)^{-1} sum_M prod_k C(c i_k, d_k) d_k! prod_l u_kl^m_kl / m_kl!`
/// with `d_k` the row sums of `M` and `j` its column sums.
pub fn kimura_forward_formula(c: u64, u: &[Vec<Rational>], i: &[u64], j: &[u64]) -> Rational {
    let n: u64 = i.iter().sum();
    let k_types = i.len();
    let mut total = q(0, 1);
    for m in matrices_with_col_sums(k_types, j) {
        let mut term = q(1, 1);
        for k in 0..k_types {
            let row = &m[k * k_types..(k + 1) * k_types];
            let d: u64 = row.iter().sum();
            term *= Rational::binomial(c * i[k], d) * factorial::<Rational>(d);
            for (l, &x) in row.iter().enumerate() {
                term *= pow(&u[k][l], x) / factorial::<Rational>(x);
            }
        }
        total += term;
    }
    total / Rational::binomial(c * n, n)
}

/// `P^rep` of the backward model: place a sample of `|i|` children (the first
/// `i_1` of type 1, and so on) on distinct child slots and count distinct parents.
pub fn backward_rep_oracle(law: &OffspringLaw<Rational>, i: &[u64], j: &[u64]) -> Rational {
    let n = law.size();
    let size: u64 = i.iter().sum();
    let mut types = Vec::new();
    for (k, &ik) in i.iter().enumerate() {
        types.extend(std::iter::repeat_n(k, ik as usize));
    }
    let places = injections(size as usize, n as usize);
    let mut total = q(0, 1);
    for (nu, p) in outcomes(law) {
        let mut hits = 0u64;
        for place in &places {
            let mut parent_type: BTreeMap<usize, usize> = BTreeMap::new();
            let mut pure = true;
            for (s, &slot) in place.iter().enumerate() {
                let parent = parent_of(&nu, slot as u64);
                if *parent_type.entry(parent).or_insert(types[s]) != types[s] {
                    pure = false;
                }
            }
            let mut counts = vec![0u64; i.len()];
            for &t in parent_type.values() {
                counts[t] += 1;
            }
            if pure && counts == j {
                hits += 1;
            }
        }
        total += p * q(hits as i64, places.len() as i64);
    }
    total
}

/// `P^mut` of the backward model: every individual of type `k` independently
/// takes type `l` with weight `u_lk`.
pub fn backward_mut_oracle(u: &[Vec<Rational>], i: &[u64], j: &[u64]) -> Rational {
    let k_types = i.len();
    let mut types = Vec::new();
    for (k, &ik) in i.iter().enumerate() {
        types.extend(std::iter::repeat_n(k, ik as usize));
    }
    let mut total = q(0, 1);
    let m = types.len() as u32;
    for code in 0..(k_types as u64).pow(m) {
        let mut c = code;
        let mut w = q(1, 1);
        let mut counts = vec![0u64; k_types];
        for &k in &types {
            let l = (c % k_types as u64) as usize;
            c /= k_types as u64;
            w *= u[l][k].clone();
            counts[l] += 1;
        }
        if counts == j {
            total += w;
        }
    }
    total
}

mod common;

use std::collections::BTreeMap;

use cannings::scalar::factorial;
use cannings::stats::{chi_square_test, tally};
use cannings::{ExactLaw, ExactVariableModel, Law, MutationMatrix, Rational, Scalar, VariableModel};
use common::{forward_row_oracle, kimura_forward_formula, q};
use proptest::prelude::*;

const CAP: usize = 10_000;

fn exact_laws(n: u64) -> Vec<ExactLaw> {
    let mut laws = vec![
        ExactLaw::wright_fisher(n).unwrap(),
        ExactLaw::kimura(n, 2).unwrap(),
        ExactLaw::kimura(n, 3).unwrap(),
        ExactLaw::dirac(n).unwrap(),
        ExactLaw::extreme_permutation(n).unwrap(),
    ];
    if n >= 3 {
        let mut skewed = vec![2, 0];
        skewed.resize(n as usize, 1);
        laws.push(ExactLaw::table(n, vec![(skewed, q(3, 4)), (vec![n], q(1, 4))]).unwrap());
    }
    laws
}

fn exact_mutation(k: usize) -> MutationMatrix<Rational> {
    let rows = match k {
        1 => vec![vec![q(1, 1)]],
        2 => vec![vec![q(3, 4), q(1, 4)], vec![q(1, 3), q(2, 3)]],
        _ => vec![
            vec![q(1, 2), q(1, 4), q(1, 4)],
            vec![q(0, 1), q(5, 6), q(1, 6)],
            vec![q(1, 5), q(0, 1), q(4, 5)],
        ],
    };
    MutationMatrix::new(rows).unwrap()
}

#[test]
fn matrix_rows_match_child_by_child_enumeration() {
    for n in 1..=5 {
        for law in exact_laws(n) {
            for k in 1..=3 {
                let model = VariableModel::new(law.clone(), exact_mutation(k));
                let pi = model.forward_transition_matrix(CAP).unwrap();
                for from in pi.space().states() {
                    let oracle = forward_row_oracle(&model, from.counts());
                    for to in pi.space().states() {
                        let want = oracle.get(to.counts()).cloned().unwrap_or_else(|| q(0, 1));
                        assert_eq!(
                            pi.entry(from, to),
                            want,
                            "{:?} N={n} K={k} {from} -> {to}",
                            law.family()
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn product_matches_direct_double_sum() {
    for n in 1..=6 {
        for law in exact_laws(n) {
            let law = law_to_f64(&law);
            for k in 1..=3 {
                let model = VariableModel::new(law.clone(), exact_mutation(k).to_f64());
                let pi = model.forward_transition_matrix(CAP).unwrap();
                pi.check_stochastic(1e-10).unwrap();
                for from in pi.space().states() {
                    for to in pi.space().states() {
                        let direct = model.direct_transition_probability(from.counts(), to.counts()).unwrap();
                        assert!(
                            (pi.entry(from, to) - direct).abs() < 1e-10,
                            "N={n} K={k} {from} -> {to}"
                        );
                    }
                }
            }
        }
    }
}

fn law_to_f64(law: &ExactLaw) -> Law {
    let shapes = law
        .shapes()
        .unwrap()
        .into_iter()
        .map(|(s, p)| (s, p.approx()))
        .collect();
    Law::table(law.size(), shapes).unwrap()
}

#[test]
fn wright_fisher_small_example() {
    let model = ExactVariableModel::new(ExactLaw::wright_fisher(2).unwrap(), MutationMatrix::identity(2));
    let row = model.reproduction_law(&[1, 1]).unwrap();
    assert_eq!(row[&vec![2, 0]], q(1, 4));
    assert_eq!(row[&vec![1, 1]], q(1, 2));
    assert_eq!(row[&vec![0, 2]], q(1, 4));
}

#[test]
fn uniform_mutation_closed_form() {
    for n in 1..=6u64 {
        for law in exact_laws(n) {
            for k in 2..=3usize {
                let u = MutationMatrix::new(vec![vec![q(1, k as i64); k]; k]).unwrap();
                let pi = VariableModel::new(law.clone(), u)
                    .forward_transition_matrix(CAP)
                    .unwrap();
                for from in pi.space().states() {
                    for to in pi.space().states() {
                        let mut want = factorial::<Rational>(n) / Rational::from_count(k as u64).pow(n as i32);
                        for &jl in to.counts() {
                            want /= factorial::<Rational>(jl);
                        }
                        assert_eq!(pi.entry(from, to), want);
                    }
                }
            }
        }
    }
}

#[test]
fn parent_independent_mutation_closed_form() {
    let target = vec![q(1, 6), q(1, 2), q(1, 3)];
    for n in 1..=5u64 {
        for law in exact_laws(n) {
            let model = VariableModel::new(law, MutationMatrix::parent_independent(target.clone()).unwrap());
            let space = model.state_space(CAP).unwrap();
            for i in space.states() {
                for j in space.states() {
                    let mut want = factorial::<Rational>(n);
                    for (l, &jl) in j.counts().iter().enumerate() {
                        want *= target[l].pow(jl as i32) / factorial::<Rational>(jl);
                    }
                    assert_eq!(model.pi_mut_entry(i.counts(), j.counts()), want);
                }
            }
        }
    }
}

#[test]
fn wright_fisher_rows_are_multinomial() {
    let u = exact_mutation(3);
    for n in 1..=6u64 {
        let model = VariableModel::new(ExactLaw::wright_fisher(n).unwrap(), u.clone());
        let pi = model.forward_transition_matrix(CAP).unwrap();
        for from in pi.space().states() {
            let i = from.counts();
            let probs: Vec<Rational> = (0..3)
                .map(|l| {
                    (0..3).fold(q(0, 1), |acc, k| acc + u.get(k, l).clone() * Rational::from_count(i[k]))
                        / Rational::from_count(n)
                })
                .collect();
            for to in pi.space().states() {
                let mut want = factorial::<Rational>(n);
                for (l, &jl) in to.counts().iter().enumerate() {
                    want *= probs[l].pow(jl as i32) / factorial::<Rational>(jl);
                }
                assert_eq!(pi.entry(from, to), want);
            }
        }
    }
}

#[test]
fn identity_mutation_and_absorbing_states() {
    for n in 1..=5u64 {
        for law in exact_laws(n) {
            let mats = VariableModel::new(law.clone(), MutationMatrix::identity(3))
                .matrices(CAP)
                .unwrap();
            let len = mats.pi.len();
            for a in 0..len {
                for b in 0..len {
                    let want = if a == b { q(1, 1) } else { q(0, 1) };
                    assert_eq!(mats.pi_mut.values().get(a, b).clone(), want);
                }
            }
            for k in 0..3 {
                let mut corner = vec![0; 3];
                corner[k] = n;
                let state = cannings::TypeCounts::new(corner);
                assert_eq!(mats.pi.entry(&state, &state), q(1, 1));
            }
            if law.family() == cannings::LawFamily::Dirac {
                assert!(mats.pi_rep.row_sums().iter().all(|r| *r == q(1, 1)));
                for a in 0..len {
                    assert_eq!(mats.pi_rep.values().get(a, a).clone(), q(1, 1));
                }
            }
        }
    }
}

#[test]
fn kimura_matches_contingency_formula() {
    let u = exact_mutation(3);
    for c in [2u64, 3] {
        for n in 1..=5u64 {
            let model = VariableModel::new(ExactLaw::kimura(n, c).unwrap(), u.clone());
            let pi = model.forward_transition_matrix(CAP).unwrap();
            for from in pi.space().states() {
                for to in pi.space().states() {
                    let want = kimura_forward_formula(c, u.rows(), from.counts(), to.counts());
                    assert_eq!(pi.entry(from, to), want, "c={c} {from} -> {to}");
                }
            }
        }
    }
}

/// Every type vector of length `n` over `k` types.
fn type_vectors(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|v| (0..k).map(move |t| [v.clone(), vec![t]].concat()))
            .collect();
    }
    out
}

fn counts(x: &[usize], k: usize) -> Vec<u64> {
    let mut c = vec![0; k];
    for &t in x {
        c[t] += 1;
    }
    c
}

/// The typed-individual chain agrees with the permutation average and lumps
/// onto the count chain.
#[test]
fn typed_individual_chain_lumps() {
    for n in 1..=5u64 {
        for law in exact_laws(n) {
            for k in (2..=3).filter(|&k| n as usize + k <= 7) {
                let model = VariableModel::new(law.clone(), exact_mutation(k));
                // The permutation average costs N! per entry.
                let cross_check = n as usize + k <= 6;
                for x in type_vectors(n as usize, k) {
                    let i = counts(&x, k);
                    let row = model.transition_law(&i).unwrap();
                    let mut lumped: BTreeMap<Vec<u64>, Rational> = BTreeMap::new();
                    for y in type_vectors(n as usize, k) {
                        let p = model.typed_individual_transition(&x, &y).unwrap();
                        if cross_check {
                            assert_eq!(
                                p,
                                model.typed_individual_by_permutations(&x, &y).unwrap(),
                                "{x:?} -> {y:?}"
                            );
                        }
                        *lumped.entry(counts(&y, k)).or_insert_with(|| q(0, 1)) += p;
                    }
                    lumped.retain(|_, p| *p != q(0, 1));
                    assert_eq!(lumped, row, "{x:?}");
                }
            }
        }
    }
}

#[test]
fn typed_individual_examples() {
    let u = exact_mutation(3);
    let one = VariableModel::new(ExactLaw::wright_fisher(1).unwrap(), u.clone());
    for x in 0..3 {
        for y in 0..3 {
            assert_eq!(
                one.typed_individual_transition(&[x], &[y]).unwrap(),
                u.get(x, y).clone()
            );
        }
    }
    let target = vec![q(1, 2), q(1, 3), q(1, 6)];
    let pim = VariableModel::new(
        ExactLaw::kimura(3, 2).unwrap(),
        MutationMatrix::parent_independent(target.clone()).unwrap(),
    );
    for x in type_vectors(3, 3) {
        for y in type_vectors(3, 3) {
            let want = y.iter().fold(q(1, 1), |acc, &t| acc * target[t].clone());
            assert_eq!(pim.typed_individual_transition(&x, &y).unwrap(), want);
        }
    }
}

#[test]
fn simulated_wright_fisher_row_is_binomial() {
    let u = MutationMatrix::new(vec![vec![0.9, 0.1], vec![0.25, 0.75]]).unwrap();
    let model = VariableModel::new(Law::wright_fisher(12).unwrap(), u);
    let i = [5u64, 7];
    let expected: BTreeMap<u64, f64> = model
        .transition_law(&i)
        .unwrap()
        .into_iter()
        .map(|(j, p)| (j[0], p))
        .collect();
    let p1: f64 = (5.0 * 0.9 + 7.0 * 0.25) / 12.0;
    for (&j, &p) in &expected {
        let binom = Rational::binomial(12, j).approx() * p1.powi(j as i32) * (1.0 - p1).powi(12 - j as i32);
        assert!((p - binom).abs() < 1e-12);
    }
    let observed = tally(21, "forward-wf", 100_000, |rng| model.step(&i, rng)[0]);
    let test = chi_square_test(&observed, &expected);
    assert!(test.passes(0.01), "{test:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn simulation_conserves_population(seed in any::<u64>(), a in 0u64..=9, family in 0usize..5) {
        use rand::SeedableRng;
        let n = 9;
        let law = [
            Law::wright_fisher(n),
            Law::kimura(n, 2),
            Law::dirac(n),
            Law::extreme_permutation(n),
            Law::table(n, vec![(vec![3, 3, 3], 1.0)]),
        ][family].clone().unwrap();
        let u = MutationMatrix::new(vec![vec![0.7, 0.3], vec![0.2, 0.8]]).unwrap();
        let model = VariableModel::new(law, u);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let path = model.simulate_forward(&[a, n - a], 30, &mut rng).unwrap();
        prop_assert!(path.iter().all(|s| s.total() == n));
    }

    #[test]
    fn absorbing_without_mutation(seed in any::<u64>(), k in 0usize..3) {
        use rand::SeedableRng;
        let model = VariableModel::new(Law::kimura(7, 2).unwrap(), MutationMatrix::identity(3));
        let mut start = vec![0; 3];
        start[k] = 7;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let path = model.simulate_forward(&start, 10, &mut rng).unwrap();
        prop_assert!(path.iter().all(|s| s.counts() == start.as_slice()));
    }
}

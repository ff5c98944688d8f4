//! Goodness-of-fit checks of simulated outcomes against exact laws.

use std::collections::BTreeMap;

use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::rng::{stream_rng, StreamRng};

/// Cells with expected counts below this are pooled into one cell.
pub const MIN_EXPECTED: f64 = 5.0;

#[derive(Clone, Debug, PartialEq)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Draws that landed on outcomes with zero expected probability.
    pub impossible: u64,
}

impl ChiSquareTest {
    pub fn passes(&self, level: f64) -> bool {
        self.impossible == 0 && self.p_value > level
    }
}

/// Pearson chi-square test of observed outcome counts against `expected`
/// probabilities. Cells with expected count below [`MIN_EXPECTED`] are pooled.
pub fn chi_square_test<K: Ord>(observed: &BTreeMap<K, u64>, expected: &BTreeMap<K, f64>) -> ChiSquareTest {
    let reps: u64 = observed.values().sum();
    let n = reps as f64;
    let impossible: u64 = observed
        .iter()
        .filter(|(k, _)| expected.get(k).is_none_or(|p| *p <= 0.0))
        .map(|(_, c)| c)
        .sum();
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut pool_e, mut pool_o) = (0.0, 0.0);
    for (k, &p) in expected {
        let e = p * n;
        let o = observed.get(k).copied().unwrap_or(0) as f64;
        if e < MIN_EXPECTED {
            pool_e += e;
            pool_o += o;
        } else {
            cells.push((e, o));
        }
    }
    if pool_e > 0.0 {
        if pool_e < MIN_EXPECTED && !cells.is_empty() {
            // Merge an undersized pool into the smallest regular cell.
            let idx = cells
                .iter()
                .enumerate()
                .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
                .map(|(i, _)| i)
                .expect("non-empty");
            cells[idx].0 += pool_e;
            cells[idx].1 += pool_o;
        } else {
            cells.push((pool_e, pool_o));
        }
    }
    let statistic: f64 = cells.iter().map(|(e, o)| (o - e) * (o - e) / e).sum();
    let dof = cells.len().saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        ChiSquared::new(dof as f64)
            .expect("positive degrees of freedom")
            .sf(statistic)
    };
    ChiSquareTest {
        statistic,
        dof,
        p_value,
        impossible,
    }
}

/// Runs `f` once per replicate on its own random stream, in parallel, and tallies
/// the outcomes.
pub fn tally<K, F>(seed: u64, tag: &str, reps: u64, f: F) -> BTreeMap<K, u64>
where
    K: Ord + Send,
    F: Fn(&mut StreamRng) -> K + Sync,
{
    (0..reps)
        .into_par_iter()
        .fold(BTreeMap::new, |mut acc, r| {
            let mut rng = stream_rng(seed, tag, r);
            *acc.entry(f(&mut rng)).or_insert(0) += 1;
            acc
        })
        .reduce(BTreeMap::new, |mut a, b| {
            for (k, c) in b {
                *a.entry(k).or_insert(0) += c;
            }
            a
        })
}

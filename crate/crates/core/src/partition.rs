//! Typed partitions of `{1..n}`: set partitions whose blocks each carry a type.

use std::fmt;
use std::str::FromStr;

use crate::combinatorics::{for_each_set_partition, stirling2_row};
use crate::error::{Error, Result};
use crate::matrix::StateSpace;

/// Largest supported sample size (blocks are stored as 64-bit masks).
pub const MAX_SAMPLE_SIZE: usize = 64;

/// Default bound on the number of typed partitions in an enumerated state space.
pub const DEFAULT_STATE_CAP: usize = 1_000_000;

/// A typed partition in canonical form: blocks sorted by their smallest element.
/// Element `i` (0-based) is displayed as `i + 1`; types are displayed as letters.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TypedPartition {
    n: usize,
    blocks: Vec<(u64, usize)>,
}

fn full_mask(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

impl TypedPartition {
    /// Builds a partition from `(mask, type)` blocks in any order.
    pub fn new(n: usize, mut blocks: Vec<(u64, usize)>) -> Result<Self> {
        if n > MAX_SAMPLE_SIZE {
            return Err(Error::invalid(
                "typed partition",
                format!("sample size {n} exceeds {MAX_SAMPLE_SIZE}"),
            ));
        }
        let mut seen = 0u64;
        for &(mask, _) in &blocks {
            if mask == 0 || seen & mask != 0 {
                return Err(Error::invalid(
                    "typed partition",
                    "blocks must be non-empty and disjoint",
                ));
            }
            seen |= mask;
        }
        if seen != full_mask(n) {
            return Err(Error::invalid("typed partition", "blocks must cover {1..n}"));
        }
        blocks.sort_by_key(|&(mask, _)| mask.trailing_zeros());
        Ok(TypedPartition { n, blocks })
    }

    /// The initial state `{({1}, k_1), ..., ({n}, k_n)}`.
    pub fn singletons(types: &[usize]) -> Result<Self> {
        Self::new(
            types.len(),
            types.iter().enumerate().map(|(i, &k)| (1u64 << i, k)).collect(),
        )
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> &[(u64, usize)] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Number of blocks of each type.
    pub fn counts_by_type(&self, types: usize) -> Vec<u64> {
        let mut out = vec![0u64; types];
        for &(_, k) in &self.blocks {
            out[k] += 1;
        }
        out
    }

    pub fn max_type(&self) -> Option<usize> {
        self.blocks.iter().map(|&(_, k)| k).max()
    }

    /// Restriction to `{1..m}`, dropping blocks that become empty.
    pub fn restrict(&self, m: usize) -> Self {
        let keep = full_mask(m.min(self.n));
        let blocks = self
            .blocks
            .iter()
            .filter_map(|&(mask, k)| {
                let b = mask & keep;
                (b != 0).then_some((b, k))
            })
            .collect();
        Self::new(m.min(self.n), blocks).expect("restriction of a valid partition")
    }

    /// Image under the element map `i -> perm[i]`.
    pub fn relabel(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.n);
        let blocks = self
            .blocks
            .iter()
            .map(|&(mask, k)| {
                let mut out = 0u64;
                for (i, &p) in perm.iter().enumerate() {
                    if mask >> i & 1 == 1 {
                        out |= 1 << p;
                    }
                }
                (out, k)
            })
            .collect();
        Self::new(self.n, blocks).expect("relabelling preserves validity")
    }

    /// Group sizes of a within-type coarsening `self -> other`.
    ///
    /// Returns `None` unless every `k`-block of `other` is a union of `k`-blocks
    /// of `self`. Otherwise entry `k` lists, for each `k`-block of `other`, how
    /// many blocks of `self` it absorbs.
    pub fn merge_groups(&self, other: &Self, types: usize) -> Option<Vec<Vec<u64>>> {
        if self.n != other.n {
            return None;
        }
        let mut groups = vec![Vec::new(); types];
        for &(target, k) in &other.blocks {
            let mut covered = 0u64;
            let mut absorbed = 0u64;
            for &(mask, t) in &self.blocks {
                if mask & target == 0 {
                    continue;
                }
                if mask & !target != 0 || t != k {
                    return None;
                }
                covered |= mask;
                absorbed += 1;
            }
            if covered != target {
                return None;
            }
            groups[k].push(absorbed);
        }
        Some(groups)
    }

    /// Retyping table `n[k][l]`: blocks of type `k` here and type `l` in `other`.
    /// `None` unless both partitions have the same blocks.
    pub fn retyping(&self, other: &Self, types: usize) -> Option<Vec<Vec<u64>>> {
        if self.n != other.n || self.blocks.len() != other.blocks.len() {
            return None;
        }
        let mut table = vec![vec![0u64; types]; types];
        for (&(a, k), &(b, l)) in self.blocks.iter().zip(&other.blocks) {
            if a != b {
                return None;
            }
            table[k][l] += 1;
        }
        Some(table)
    }
}

fn type_label(k: usize) -> String {
    if k < 26 {
        ((b'a' + k as u8) as char).to_string()
    } else {
        format!("t{k}")
    }
}

fn parse_type(s: &str) -> Option<usize> {
    let bytes = s.as_bytes();
    if bytes.len() == 1 && bytes[0].is_ascii_lowercase() {
        return Some((bytes[0] - b'a') as usize);
    }
    s.strip_prefix('t')?.parse().ok()
}

impl fmt::Display for TypedPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (b, &(mask, k)) in self.blocks.iter().enumerate() {
            if b > 0 {
                f.write_str("|")?;
            }
            f.write_str("{")?;
            let mut first = true;
            for i in 0..self.n {
                if mask >> i & 1 == 1 {
                    if !first {
                        f.write_str(",")?;
                    }
                    write!(f, "{}", i + 1)?;
                    first = false;
                }
            }
            write!(f, "}}:{}", type_label(k))?;
        }
        Ok(())
    }
}

impl FromStr for TypedPartition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid("typed partition", format!("cannot parse {s:?}"));
        let mut blocks = Vec::new();
        let mut n = 0usize;
        for part in s.split('|') {
            let (set, ty) = part.rsplit_once(':').ok_or_else(bad)?;
            let inner = set
                .strip_prefix('{')
                .and_then(|x| x.strip_suffix('}'))
                .ok_or_else(bad)?;
            let mut mask = 0u64;
            for item in inner.split(',') {
                let e: usize = item.trim().parse().map_err(|_| bad())?;
                if e == 0 || e > MAX_SAMPLE_SIZE {
                    return Err(bad());
                }
                mask |= 1 << (e - 1);
                n = n.max(e);
            }
            blocks.push((mask, parse_type(ty.trim()).ok_or_else(bad)?));
        }
        TypedPartition::new(n, blocks)
    }
}

/// `sum over set partitions of {1..n} of K^{#blocks}`.
pub fn typed_partition_count(n: usize, types: usize) -> u128 {
    stirling2_row(n)
        .iter()
        .enumerate()
        .map(|(j, &s)| s.saturating_mul((types as u128).saturating_pow(j as u32)))
        .fold(0u128, u128::saturating_add)
}

/// All typed partitions of `{1..n}` with types in `0..types`: set partitions in
/// restricted-growth order, each followed by its typings in lexicographic order.
pub fn enumerate_typed_partitions(n: usize, types: usize, cap: usize) -> Result<StateSpace<TypedPartition>> {
    if n == 0 || n > MAX_SAMPLE_SIZE || types == 0 {
        return Err(Error::invalid(
            "typed partition space",
            format!("need 1 <= n <= {MAX_SAMPLE_SIZE} and at least one type"),
        ));
    }
    let total = typed_partition_count(n, types);
    if total > cap as u128 {
        return Err(Error::Size { size: total, cap });
    }
    let mut states = Vec::with_capacity(total as usize);
    for_each_set_partition(n, |rgs, nblocks| {
        let mut masks = vec![0u64; nblocks];
        for (i, &b) in rgs.iter().enumerate() {
            masks[b] |= 1 << i;
        }
        let mut typing = vec![0usize; nblocks];
        loop {
            let blocks = masks.iter().copied().zip(typing.iter().copied()).collect();
            states.push(TypedPartition { n, blocks });
            // Odometer increment, last block fastest.
            let mut pos = nblocks;
            loop {
                if pos == 0 {
                    return;
                }
                pos -= 1;
                typing[pos] += 1;
                if typing[pos] < types {
                    break;
                }
                typing[pos] = 0;
            }
        }
    });
    Ok(StateSpace::new(states))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_counts() {
        assert_eq!(enumerate_typed_partitions(1, 2, DEFAULT_STATE_CAP).unwrap().len(), 2);
        assert_eq!(enumerate_typed_partitions(2, 2, DEFAULT_STATE_CAP).unwrap().len(), 6);
        assert_eq!(enumerate_typed_partitions(4, 2, DEFAULT_STATE_CAP).unwrap().len(), 94);
        assert_eq!(typed_partition_count(4, 2), 94);
        assert!(matches!(
            enumerate_typed_partitions(4, 2, 50),
            Err(Error::Size { size: 94, cap: 50 })
        ));
    }

    #[test]
    fn display_round_trip() {
        let p = TypedPartition::new(3, vec![(0b010, 1), (0b101, 0)]).unwrap();
        assert_eq!(p.to_string(), "{1,3}:a|{2}:b");
        assert_eq!("{1,3}:a|{2}:b".parse::<TypedPartition>().unwrap(), p);
        for s in enumerate_typed_partitions(3, 3, DEFAULT_STATE_CAP).unwrap().states() {
            assert_eq!(&s.to_string().parse::<TypedPartition>().unwrap(), s);
        }
        assert!("{1}:a|{1,2}:b".parse::<TypedPartition>().is_err());
    }

    #[test]
    fn merge_groups_and_retyping() {
        let pi: TypedPartition = "{1}:a|{2}:a|{3}:b".parse().unwrap();
        let merged: TypedPartition = "{1,2}:a|{3}:b".parse().unwrap();
        assert_eq!(pi.merge_groups(&merged, 2), Some(vec![vec![2], vec![1]]));
        let cross: TypedPartition = "{1,3}:a|{2}:a".parse().unwrap();
        assert_eq!(pi.merge_groups(&cross, 2), None);
        let retyped: TypedPartition = "{1}:b|{2}:a|{3}:b".parse().unwrap();
        assert_eq!(pi.retyping(&retyped, 2), Some(vec![vec![1, 1], vec![0, 1]]));
        assert_eq!(pi.retyping(&merged, 2), None);
    }

    #[test]
    fn restriction_and_relabelling() {
        let p: TypedPartition = "{1,3}:a|{2,4}:b".parse().unwrap();
        assert_eq!(p.restrict(2).to_string(), "{1}:a|{2}:b");
        assert_eq!(p.restrict(3).to_string(), "{1,3}:a|{2}:b");
        assert_eq!(p.relabel(&[1, 0, 2, 3]).to_string(), "{1,4}:b|{2,3}:a");
    }
}

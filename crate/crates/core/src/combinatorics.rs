//! Enumeration helpers: compositions, integer and set partitions, and
//! contingency tables with fixed margins.

/// Calls `f` with every ordered vector of `parts` non-negative integers summing
/// to `total`, in lexicographic order.
pub fn for_each_composition<F: FnMut(&[u64])>(total: u64, parts: usize, mut f: F) {
    let caps = vec![total; parts];
    for_each_bounded_composition(total, &caps, &mut f);
}

/// Like [`for_each_composition`] but every part is at least one.
pub fn for_each_positive_composition<F: FnMut(&[u64])>(total: u64, parts: usize, mut f: F) {
    if parts == 0 {
        if total == 0 {
            f(&[]);
        }
        return;
    }
    if total < parts as u64 {
        return;
    }
    for_each_composition(total - parts as u64, parts, |c| {
        let shifted: Vec<u64> = c.iter().map(|x| x + 1).collect();
        f(&shifted);
    });
}

/// Compositions of `total` with part `r` bounded by `caps[r]`.
pub fn for_each_bounded_composition<F: FnMut(&[u64])>(total: u64, caps: &[u64], f: &mut F) {
    let mut buf = vec![0u64; caps.len()];
    let suffix_caps = suffix_sums(caps);
    bounded_rec(total, caps, &suffix_caps, 0, &mut buf, f);
}

fn suffix_sums(xs: &[u64]) -> Vec<u64> {
    let mut out = vec![0u64; xs.len() + 1];
    for i in (0..xs.len()).rev() {
        out[i] = out[i + 1].saturating_add(xs[i]);
    }
    out
}

fn bounded_rec<F: FnMut(&[u64])>(
    remaining: u64,
    caps: &[u64],
    suffix_caps: &[u64],
    pos: usize,
    buf: &mut [u64],
    f: &mut F,
) {
    if pos == caps.len() {
        if remaining == 0 {
            f(buf);
        }
        return;
    }
    let rest = suffix_caps[pos + 1];
    let lo = remaining.saturating_sub(rest);
    let hi = remaining.min(caps[pos]);
    if lo > hi {
        return;
    }
    for v in lo..=hi {
        buf[pos] = v;
        bounded_rec(remaining - v, caps, suffix_caps, pos + 1, buf, f);
    }
    buf[pos] = 0;
}

/// Calls `f` with every partition of `n` as a non-increasing vector of positive parts.
pub fn for_each_integer_partition<F: FnMut(&[u64])>(n: u64, mut f: F) {
    let mut buf = Vec::new();
    int_part_rec(n, n, &mut buf, &mut f);
}

fn int_part_rec<F: FnMut(&[u64])>(remaining: u64, max: u64, buf: &mut Vec<u64>, f: &mut F) {
    if remaining == 0 {
        f(buf);
        return;
    }
    for part in (1..=remaining.min(max)).rev() {
        buf.push(part);
        int_part_rec(remaining - part, part, buf, f);
        buf.pop();
    }
}

/// Set partitions of `{0..n}` as restricted growth strings, in lexicographic order.
/// Entry `i` is the block label of element `i`; labels follow first appearance.
pub fn for_each_set_partition<F: FnMut(&[usize], usize)>(n: usize, mut f: F) {
    if n == 0 {
        f(&[], 0);
        return;
    }
    let mut rgs = vec![0usize; n];
    rgs_rec(1, 1, &mut rgs, &mut f);
}

fn rgs_rec<F: FnMut(&[usize], usize)>(pos: usize, blocks: usize, rgs: &mut [usize], f: &mut F) {
    if pos == rgs.len() {
        f(rgs, blocks);
        return;
    }
    for label in 0..=blocks {
        rgs[pos] = label;
        rgs_rec(pos + 1, blocks.max(label + 1), rgs, f);
    }
    rgs[pos] = 0;
}

/// Stirling numbers of the second kind `S(n, k)` for `k = 0..=n`.
pub fn stirling2_row(n: usize) -> Vec<u128> {
    let mut row = vec![0u128; n + 1];
    row[0] = 1;
    for m in 1..=n {
        let mut next = vec![0u128; n + 1];
        for k in 1..=m {
            next[k] = (k as u128) * row[k] + row[k - 1];
        }
        row = next;
    }
    row
}

/// Calls `f` with every non-negative integer matrix (row-major, `rows.len() x cols.len()`)
/// with the given row and column sums. Rows are filled one at a time and each row is
/// bounded by the remaining column capacity.
pub fn for_each_contingency_table<F: FnMut(&[u64])>(rows: &[u64], cols: &[u64], mut f: F) {
    let r_total: u64 = rows.iter().sum();
    let c_total: u64 = cols.iter().sum();
    if r_total != c_total {
        return;
    }
    let ncols = cols.len();
    let mut table = vec![0u64; rows.len() * ncols];
    let mut remaining = cols.to_vec();
    table_rec(rows, 0, ncols, &mut remaining, &mut table, &mut f);
}

fn table_rec<F: FnMut(&[u64])>(
    rows: &[u64],
    row: usize,
    ncols: usize,
    remaining: &mut Vec<u64>,
    table: &mut Vec<u64>,
    f: &mut F,
) {
    if row == rows.len() {
        if remaining.iter().all(|&c| c == 0) {
            f(table);
        }
        return;
    }
    if row + 1 == rows.len() {
        // The last row is forced to the leftover column sums.
        let left: u64 = remaining.iter().sum();
        if left != rows[row] {
            return;
        }
        table[row * ncols..(row + 1) * ncols].copy_from_slice(remaining);
        f(table);
        return;
    }
    let caps = remaining.clone();
    for_each_bounded_composition(rows[row], &caps, &mut |c: &[u64]| {
        for (j, &v) in c.iter().enumerate() {
            table[row * ncols + j] = v;
            remaining[j] -= v;
        }
        table_rec(rows, row + 1, ncols, remaining, table, f);
        for (j, &v) in c.iter().enumerate() {
            remaining[j] += v;
        }
    });
}

/// All vectors in `N_0^k` with entries summing to exactly `total`, lexicographic order.
pub fn simplex_points(total: u64, k: usize) -> Vec<Vec<u64>> {
    let mut out = Vec::new();
    for_each_composition(total, k, |c| out.push(c.to_vec()));
    out
}

/// All vectors in `N_0^k` with entries summing to at most `total`, lexicographic order.
pub fn bounded_simplex_points(total: u64, k: usize) -> Vec<Vec<u64>> {
    let mut out = Vec::new();
    let mut buf = vec![0u64; k];
    fn rec(pos: usize, left: u64, buf: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if pos == buf.len() {
            out.push(buf.clone());
            return;
        }
        for v in 0..=left {
            buf[pos] = v;
            rec(pos + 1, left - v, buf, out);
        }
        buf[pos] = 0;
    }
    rec(0, total, &mut buf, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composition_counts() {
        let mut count = 0;
        for_each_composition(5, 3, |c| {
            assert_eq!(c.iter().sum::<u64>(), 5);
            count += 1;
        });
        assert_eq!(count, 21);
        let mut pos = 0;
        for_each_positive_composition(5, 3, |_| pos += 1);
        assert_eq!(pos, 6);
        let mut empty = 0;
        for_each_positive_composition(0, 0, |_| empty += 1);
        assert_eq!(empty, 1);
    }

    #[test]
    fn partition_counts_match_bell_and_partition_numbers() {
        let bell = [1, 1, 2, 5, 15, 52, 203];
        for (n, &b) in bell.iter().enumerate() {
            let mut count = 0;
            for_each_set_partition(n, |_, _| count += 1);
            assert_eq!(count, b);
            let s: u128 = stirling2_row(n).iter().sum();
            assert_eq!(s, b as u128);
        }
        let p = [1, 1, 2, 3, 5, 7, 11, 15, 22];
        for (n, &pn) in p.iter().enumerate() {
            let mut count = 0;
            for_each_integer_partition(n as u64, |_| count += 1);
            assert_eq!(count, pn);
        }
    }

    #[test]
    fn contingency_tables_respect_margins() {
        let rows = [2, 1];
        let cols = [1, 1, 1];
        let mut count = 0;
        for_each_contingency_table(&rows, &cols, |t| {
            assert_eq!(t[0] + t[1] + t[2], 2);
            assert_eq!(t[3] + t[4] + t[5], 1);
            for j in 0..3 {
                assert_eq!(t[j] + t[3 + j], 1);
            }
            count += 1;
        });
        assert_eq!(count, 3);
        let mut none = 0;
        for_each_contingency_table(&[2], &[1], |_| none += 1);
        assert_eq!(none, 0);
    }

    #[test]
    fn simplex_sizes() {
        assert_eq!(simplex_points(4, 3).len(), 15);
        assert_eq!(bounded_simplex_points(4, 2).len(), 15);
        assert_eq!(simplex_points(3, 2)[0], vec![0, 3]);
    }
}

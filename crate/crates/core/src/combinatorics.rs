//! Binomial coefficients, k-subset enumeration and lexicographic
//! ranking/unranking of k-subsets of `[0, n)`.

use crate::choice::{Alternative, KSet};

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step.
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// `ln(n!)` by direct summation.
pub fn ln_factorial(n: u64) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// `log2(n!)` by direct summation.
pub fn log2_factorial(n: u64) -> f64 {
    (2..=n).map(|i| (i as f64).log2()).sum()
}

/// All k-subsets of `[0, n)` in lexicographic order.
#[derive(Debug, Clone)]
pub struct KSubsets {
    n: usize,
    current: Option<Vec<usize>>,
}

impl KSubsets {
    pub fn new(n: usize, k: usize) -> Self {
        let current = if k <= n { Some((0..k).collect()) } else { None };
        KSubsets { n, current }
    }
}

impl Iterator for KSubsets {
    type Item = KSet;

    fn next(&mut self) -> Option<KSet> {
        let cur = self.current.as_mut()?;
        let out = KSet::from_sorted_unchecked(cur.iter().copied().map(Alternative).collect());
        let k = cur.len();
        let n = self.n;
        let mut i = k;
        loop {
            if i == 0 {
                self.current = None;
                break;
            }
            i -= 1;
            if cur[i] < n - k + i {
                cur[i] += 1;
                for j in i + 1..k {
                    cur[j] = cur[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

/// The k-subset of `[0, n)` at lexicographic position `index`.
pub fn unrank(mut index: u128, n: usize, k: usize) -> KSet {
    let mut members = Vec::with_capacity(k);
    let mut next = 0usize;
    for slot in 0..k {
        let remaining = (k - slot - 1) as u64;
        loop {
            let block = binomial((n - next - 1) as u64, remaining);
            if index < block {
                break;
            }
            index -= block;
            next += 1;
        }
        members.push(Alternative(next));
        next += 1;
    }
    KSet::from_sorted_unchecked(members)
}

/// Lexicographic position of `s` among k-subsets of `[0, n)`.
pub fn rank(s: &KSet, n: usize) -> u128 {
    let k = s.len();
    let mut index = 0u128;
    let mut next = 0usize;
    for (slot, a) in s.iter().enumerate() {
        let remaining = (k - slot - 1) as u64;
        while next < a.0 {
            index += binomial((n - next - 1) as u64, remaining);
            next += 1;
        }
        next += 1;
    }
    index
}

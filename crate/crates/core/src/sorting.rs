//! Deterministic top-down merge sort driven by an external, possibly
//! fallible and query-costly comparison.

/// Sorts `items` ascending under `less` and returns the number of
/// comparisons made.
///
/// `less(a, b)` answers "is `a` below `b`". The comparison sequence depends
/// only on the answers, never on the items themselves.
pub fn merge_sort_by<T, E, F>(items: Vec<T>, mut less: F) -> Result<(Vec<T>, u64), E>
where
    T: Clone,
    F: FnMut(&T, &T) -> Result<bool, E>,
{
    let mut comparisons = 0u64;
    let sorted = sort_rec(items, &mut less, &mut comparisons)?;
    Ok((sorted, comparisons))
}

fn sort_rec<T, E, F>(mut items: Vec<T>, less: &mut F, count: &mut u64) -> Result<Vec<T>, E>
where
    T: Clone,
    F: FnMut(&T, &T) -> Result<bool, E>,
{
    if items.len() <= 1 {
        return Ok(items);
    }
    let right = items.split_off(items.len() / 2);
    let left = sort_rec(items, less, count)?;
    let right = sort_rec(right, less, count)?;

    let mut out = Vec::with_capacity(left.len() + right.len());
    let (mut i, mut j) = (0, 0);
    while i < left.len() && j < right.len() {
        *count += 1;
        if less(&right[j], &left[i])? {
            out.push(right[j].clone());
            j += 1;
        } else {
            out.push(left[i].clone());
            i += 1;
        }
    }
    out.extend_from_slice(&left[i..]);
    out.extend_from_slice(&right[j..]);
    Ok(out)
}

/// Worst-case comparison count of the merge sort above on `m` items:
/// `m * ceil(log2 m) - 2^ceil(log2 m) + 1`.
pub fn merge_sort_worst_case(m: u64) -> u64 {
    if m <= 1 {
        return 0;
    }
    let c = ceil_log2(m);
    m * c - (1u64 << c) + 1
}

pub fn ceil_log2(m: u64) -> u64 {
    if m <= 1 {
        0
    } else {
        64 - (m - 1).leading_zeros() as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::convert::Infallible;

    #[test]
    fn ceil_log2_values() {
        assert_eq!(ceil_log2(1), 0);
        assert_eq!(ceil_log2(2), 1);
        assert_eq!(ceil_log2(3), 2);
        assert_eq!(ceil_log2(98), 7);
        assert_eq!(ceil_log2(128), 7);
    }

    #[test]
    fn worst_case_for_98_is_under_600() {
        assert_eq!(merge_sort_worst_case(98), 98 * 7 - 128 + 1);
        assert!(merge_sort_worst_case(98) <= 600);
        assert_eq!(merge_sort_worst_case(3), 3);
    }

    #[test]
    fn error_short_circuits() {
        let mut calls = 0;
        let r: Result<_, &str> = merge_sort_by(vec![3, 1, 2, 5, 4], |_, _| {
            calls += 1;
            if calls == 2 { Err("stop") } else { Ok(true) }
        });
        assert_eq!(r.unwrap_err(), "stop");
        assert_eq!(calls, 2);
    }

    proptest! {
        #[test]
        fn sorts_and_respects_worst_case(mut v in proptest::collection::vec(any::<i32>(), 0..200)) {
            v.sort_unstable();
            v.dedup();
            let mut shuffled = v.clone();
            shuffled.reverse();
            let (sorted, count) = merge_sort_by(shuffled, |a, b| Ok::<_, Infallible>(a < b)).unwrap();
            prop_assert_eq!(&sorted, &v);
            prop_assert!(count <= merge_sort_worst_case(v.len() as u64));
        }
    }
}

//! Inference against a population mixture of position selectors.
//!
//! [`estimate_mixture`] recovers the position probabilities, up to
//! reflection, from a constant number of queries on a single (k+1)-set.
//! [`recover_mixed`] then recovers the full latent order with noisy discard
//! and two majority-vote sorts over padded comparisons.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::choice::{select_position, Alternative, KSet, LatentOrder};
use crate::error::{Error, Result};
use crate::oracle::ChoiceOracle;
use crate::sorting::{ceil_log2, merge_sort_by};

/// Consecutive uninformative answers tolerated by one padded comparison.
pub const MAX_RETRIES: u64 = 100_000;

/// Estimated position probabilities, canonicalized so `pi[0] >= pi[k-1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureEstimate {
    #[serde(rename = "pi")]
    pub probs_hat: Vec<f64>,
    pub delta: f64,
    pub epsilon: f64,
    pub queries: u64,
}

impl MixtureEstimate {
    /// Largest coordinate error against `truth`, minimized over reflection.
    pub fn max_error(&self, truth: &[f64]) -> f64 {
        max_error_up_to_reflection(&self.probs_hat, truth)
    }
}

pub fn max_error_up_to_reflection(estimate: &[f64], truth: &[f64]) -> f64 {
    assert_eq!(estimate.len(), truth.len());
    let direct = estimate.iter().zip(truth).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let mirrored = estimate.iter().rev().zip(truth).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    direct.min(mirrored)
}

/// Queries per subset: `ceil((2 + delta) / delta^2 * ln(2k(k+1) / epsilon))`.
// Negated comparisons also reject NaN.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn queries_per_subset(k: usize, delta: f64, epsilon: f64) -> Result<u64> {
    if !(delta > 0.0) || !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Configuration(format!(
            "need delta > 0 and epsilon in (0, 1), got delta = {delta}, epsilon = {epsilon}"
        )));
    }
    let arg = 2.0 * (k * (k + 1)) as f64 / epsilon;
    Ok(((2.0 + delta) / (delta * delta) * arg.ln()).ceil() as u64)
}

/// Per-round queries of noisy discard:
/// `ceil((8 + 2 gamma) / gamma^2 * ln(10 (n - 2) / epsilon))`.
pub fn discard_round_queries(n: usize, gamma: f64, epsilon: f64) -> u64 {
    let arg = 10.0 * (n.saturating_sub(2).max(1)) as f64 / epsilon;
    ((8.0 + 2.0 * gamma) / (gamma * gamma) * arg.ln()).ceil() as u64
}

/// Majority-vote repetitions per comparison for sorting `m` items, made odd
/// so votes cannot tie: `ceil(8 / gamma^2 * ln(2 m ceil(log2 m) / eps))`.
pub fn majority_repetitions(m: usize, gamma: f64, epsilon_sort: f64) -> u64 {
    let pairs = (m as u64 * ceil_log2(m as u64)).max(1) as f64;
    let r = (8.0 / (gamma * gamma) * (2.0 * pairs / epsilon_sort).ln()).ceil().max(1.0) as u64;
    r | 1
}

/// Aligns frequency tables gathered on the k+1 subsets of a (k+1)-set.
///
/// `tables[j]` lists each member of subset j with its observed selection
/// frequency. Within a subset, sorting by frequency groups answers into
/// levels, one per position. Across subsets the level of position `ell`
/// is taken by exactly two alternatives, `ell` times by the `(ell+1)`-th
/// smallest and `k - ell + 1` times by the `ell`-th, so consecutive
/// positions share one alternative and the levels chain into a path whose
/// ends carry the `{u, v x k}` signature. Walking that path orders the
/// levels by position. Returns subset 0's frequencies in position order,
/// oriented so that the first entry is at least the last.
pub fn align_frequencies(tables: &[Vec<(Alternative, f64)>]) -> Result<Vec<f64>> {
    let k = tables.len().checked_sub(1).filter(|&k| k >= 2).ok_or_else(|| {
        Error::AlignmentFailure(format!("need at least 3 subset tables, got {}", tables.len()))
    })?;
    let mut ranked: Vec<Vec<(Alternative, f64)>> = Vec::with_capacity(k + 1);
    for (j, t) in tables.iter().enumerate() {
        if t.len() != k {
            return Err(Error::AlignmentFailure(format!("subset {j} has {} entries, expected {k}", t.len())));
        }
        let mut t = t.clone();
        t.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked.push(t);
    }

    // levels[r]: multiplicities of the alternatives at frequency rank r.
    let mut levels: Vec<BTreeMap<Alternative, usize>> = vec![BTreeMap::new(); k];
    for t in &ranked {
        for (r, (a, _)) in t.iter().enumerate() {
            *levels[r].entry(*a).or_default() += 1;
        }
    }
    for (r, level) in levels.iter().enumerate() {
        if level.len() != 2 {
            return Err(Error::AlignmentFailure(format!(
                "frequency rank {r} is held by {} alternatives, expected 2",
                level.len()
            )));
        }
    }

    // Each level is an edge; together they must form a path on k+1 vertices.
    let mut incident: BTreeMap<Alternative, Vec<usize>> = BTreeMap::new();
    for (r, level) in levels.iter().enumerate() {
        for &a in level.keys() {
            incident.entry(a).or_default().push(r);
        }
    }
    if incident.len() != k + 1 || incident.values().any(|e| e.len() > 2) {
        return Err(Error::AlignmentFailure("frequency levels do not chain into a path".into()));
    }
    let ends: Vec<Alternative> = incident.iter().filter(|(_, e)| e.len() == 1).map(|(a, _)| *a).collect();
    if ends.len() != 2 {
        return Err(Error::AlignmentFailure("frequency levels do not chain into a path".into()));
    }

    let mut rank_of_position = Vec::with_capacity(k);
    let mut at = ends[0];
    let mut used = vec![false; k];
    for pos in 1..=k {
        let r = *incident[&at]
            .iter()
            .find(|&&r| !used[r])
            .ok_or_else(|| Error::AlignmentFailure("frequency levels contain a cycle".into()))?;
        used[r] = true;
        let level = &levels[r];
        // Walking from the bottom end, `at` is the pos-th smallest.
        if level[&at] != k - pos + 1 {
            return Err(Error::AlignmentFailure(format!(
                "position {pos} has multiplicities {:?}, expected {} and {pos}",
                level.values().collect::<Vec<_>>(),
                k - pos + 1
            )));
        }
        rank_of_position.push(r);
        at = *level.keys().find(|&&a| a != at).expect("two alternatives per level");
    }

    let mut pi: Vec<f64> = rank_of_position.iter().map(|&r| ranked[0][r].1).collect();
    if pi[0] < pi[k - 1] {
        pi.reverse();
    }
    Ok(pi)
}

fn check_unit(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(Error::Configuration(format!("{name} = {x} must lie in (0, 1)")))
    }
}

/// Estimates the position probabilities from `C` queries on each k-subset
/// of `{u0, ..., uk}`.
pub fn estimate_mixture<O: ChoiceOracle>(oracle: &mut O, gamma: f64, delta: f64, epsilon: f64) -> Result<MixtureEstimate> {
    let (n, k) = (oracle.universe_size(), oracle.k());
    check_unit("gamma", gamma)?;
    check_unit("epsilon", epsilon)?;
    if !(delta > 0.0 && delta < gamma / 2.0) {
        return Err(Error::Configuration(format!("delta = {delta} must lie in (0, gamma/2 = {})", gamma / 2.0)));
    }
    if n < k + 1 {
        return Err(Error::Configuration(format!("need n >= k + 1 (n = {n}, k = {k})")));
    }
    let per_subset = queries_per_subset(k, delta, epsilon)?;
    let mut tables = Vec::with_capacity(k + 1);
    for excluded in 0..=k {
        let s = KSet::from_ids((0..=k).filter(|&i| i != excluded))?;
        let mut counts: BTreeMap<Alternative, u64> = s.iter().map(|a| (a, 0)).collect();
        for _ in 0..per_subset {
            let a = oracle.query(&s)?;
            *counts
                .get_mut(&a)
                .ok_or_else(|| Error::InconsistentOracle(format!("answer {a} outside {s:?}")))? += 1;
        }
        tables.push(counts.into_iter().map(|(a, c)| (a, c as f64 / per_subset as f64)).collect());
    }
    let mut probs_hat = align_frequencies(&tables)?;
    let sum: f64 = probs_hat.iter().sum();
    probs_hat.iter_mut().for_each(|p| *p /= sum);
    Ok(MixtureEstimate { probs_hat, delta, epsilon, queries: per_subset * (k + 1) as u64 })
}

/// The member whose observed frequency is nearest `target`; ties go to the
/// higher frequency, then to the smaller id.
pub fn round_winner(freqs: &[(Alternative, f64)], target: f64) -> Alternative {
    freqs
        .iter()
        .min_by(|a, b| {
            let da = (a.1 - target).abs();
            let db = (b.1 - target).abs();
            da.total_cmp(&db).then(b.1.total_cmp(&a.1)).then(a.0.cmp(&b.0))
        })
        .expect("non-empty round")
        .0
}

/// A noisy binary comparison; repeated calls may disagree.
pub trait PairComparator {
    type Item: Clone;

    /// One noisy reading of "is `a` below `b`".
    fn less(&mut self, a: &Self::Item, b: &Self::Item) -> Result<bool>;
}

/// Merge sort where every comparison is a majority of `repetitions` noisy
/// readings. Returns the order and the number of comparisons.
pub fn noisy_sort<C: PairComparator>(comparator: &mut C, items: Vec<C::Item>, repetitions: u64) -> Result<(Vec<C::Item>, u64)> {
    merge_sort_by(items, |a, b| {
        let mut below = 0u64;
        for _ in 0..repetitions {
            if comparator.less(a, b)? {
                below += 1;
            }
        }
        Ok(2 * below > repetitions)
    })
}

/// Padded comparison: `{u, v} + anchors` is re-queried until `u` or `v`
/// is returned. When the free pair sits at positions `j` and `j+1` of the
/// query, the upper element wins with probability
/// `pi_{j+1} / (pi_j + pi_{j+1})`.
pub struct NoisyComparator<'a, O> {
    oracle: &'a mut O,
    anchors: Vec<Alternative>,
    /// Whether the winner is read as the larger element.
    favours_max: bool,
    /// Estimated probability that the favoured element wins.
    pub win_prob: f64,
    /// Estimated probability that a single query returns an anchor.
    pub fail_prob: f64,
    pub queries: u64,
}

impl<'a, O: ChoiceOracle> NoisyComparator<'a, O> {
    /// `lower` and `upper` are the estimated probabilities of the two
    /// positions the free pair occupies.
    pub fn new(oracle: &'a mut O, anchors: Vec<Alternative>, lower: f64, upper: f64) -> Self {
        let favours_max = upper >= lower;
        let win_prob = lower.max(upper) / (lower + upper);
        NoisyComparator { oracle, anchors, favours_max, win_prob, fail_prob: (1.0 - lower - upper).max(0.0), queries: 0 }
    }

    /// Queries until `u` or `v` is chosen and returns the winner.
    pub fn duel(&mut self, u: Alternative, v: Alternative) -> Result<Alternative> {
        let mut members = self.anchors.clone();
        members.extend([u, v]);
        let s = KSet::new(members)?;
        for _ in 0..MAX_RETRIES {
            let a = self.oracle.query(&s)?;
            self.queries += 1;
            if a == u || a == v {
                return Ok(a);
            }
            if !self.anchors.contains(&a) {
                return Err(Error::InconsistentOracle(format!("answer {a} outside {s:?}")));
            }
        }
        Err(Error::InconsistentOracle(format!("{MAX_RETRIES} consecutive anchor answers for {s:?}")))
    }
}

impl<O: ChoiceOracle> PairComparator for NoisyComparator<'_, O> {
    type Item = Alternative;

    fn less(&mut self, a: &Alternative, b: &Alternative) -> Result<bool> {
        let w = self.duel(*a, *b)?;
        Ok((w == *b) == self.favours_max)
    }
}

/// Query counts per stage of [`recover_mixed`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixedStageQueries {
    pub estimate: u64,
    pub discard: u64,
    pub sort_eligible: u64,
    pub sort_scrap: u64,
}

impl MixedStageQueries {
    pub fn total(&self) -> u64 {
        self.estimate + self.discard + self.sort_eligible + self.sort_scrap
    }
}

/// Recovered order and mixture. `order` and `estimate.probs_hat` share one
/// orientation, so together they predict every position's choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedRecovery {
    pub order: LatentOrder,
    pub estimate: MixtureEstimate,
    pub stages: MixedStageQueries,
}

impl MixedRecovery {
    /// The choice of the position-`ell` selector on `s` under the
    /// recovered order.
    pub fn predict(&self, ell: usize, s: &KSet) -> Result<Alternative> {
        let k = self.estimate.probs_hat.len();
        if s.len() != k || ell == 0 || ell > k {
            return Err(Error::InvalidQuery(format!("need a {k}-set and 1 <= ell <= {k}")));
        }
        if let Some(a) = s.iter().find(|&a| !self.order.contains(a)) {
            return Err(Error::InvalidQuery(format!("{a} is unknown to the model")));
        }
        Ok(select_position(&self.order, s.members(), ell))
    }

    pub fn matches_up_to_reflection(&self, truth: &LatentOrder) -> bool {
        self.order == *truth || self.order.reversed() == *truth
    }
}

/// Recovers the full order against a mixed oracle.
///
/// Stages, each with failure budget `epsilon / 5`:
/// 1. estimate the mixture at precision `gamma / 4`;
/// 2. noisy discard, keeping the k-1 alternatives never identified as the
///    round's top choice;
/// 3. sort the remaining alternatives with comparisons padded by k-2 of
///    the discarded ones;
/// 4. sort the discarded ones together with the lowest sorted alternative,
///    padded by the k-2 highest, and orient by that known element.
pub fn recover_mixed<O: ChoiceOracle>(oracle: &mut O, gamma: f64, epsilon: f64) -> Result<MixedRecovery> {
    let (n, k) = (oracle.universe_size(), oracle.k());
    check_unit("gamma", gamma)?;
    check_unit("epsilon", epsilon)?;
    if n < 2 * k {
        return Err(Error::Configuration(format!("mixed recovery needs n >= 2k (n = {n}, k = {k})")));
    }
    let budget = epsilon / 5.0;
    let mut stages = MixedStageQueries::default();

    // Stage 1. Work in the orientation where the last position is the more
    // likely end, so "top" below means the working maximum.
    let estimate = estimate_mixture(oracle, gamma, gamma / 4.0, budget)?;
    stages.estimate = estimate.queries;
    let working: Vec<f64> = estimate.probs_hat.iter().rev().copied().collect();

    // Stage 2.
    let per_round = discard_round_queries(n, gamma, epsilon);
    let mut current: Vec<Alternative> = (0..k).map(Alternative).collect();
    let mut fresh = (k..n).map(Alternative);
    let scrap: Vec<Alternative> = loop {
        let s = KSet::new(current.clone())?;
        let mut counts: BTreeMap<Alternative, u64> = s.iter().map(|a| (a, 0)).collect();
        for _ in 0..per_round {
            let a = oracle.query(&s)?;
            *counts
                .get_mut(&a)
                .ok_or_else(|| Error::InconsistentOracle(format!("answer {a} outside {s:?}")))? += 1;
        }
        stages.discard += per_round;
        let freqs: Vec<(Alternative, f64)> =
            counts.into_iter().map(|(a, c)| (a, c as f64 / per_round as f64)).collect();
        let top = round_winner(&freqs, working[k - 1]);
        current.retain(|&a| a != top);
        match fresh.next() {
            Some(u) => current.push(u),
            None => break current,
        }
    };
    let scrap_set: BTreeSet<Alternative> = scrap.iter().copied().collect();

    // Stage 3. The free pair sits above every anchor: positions k-1 and k.
    let eligible: Vec<Alternative> = (0..n).map(Alternative).filter(|a| !scrap_set.contains(a)).collect();
    let anchors: Vec<Alternative> = scrap_set.iter().copied().take(k - 2).collect();
    let reps = majority_repetitions(eligible.len(), gamma, budget);
    let mut cmp = NoisyComparator::new(oracle, anchors, working[k - 2], working[k - 1]);
    let (eligible_sorted, _) = noisy_sort(&mut cmp, eligible, reps)?;
    stages.sort_eligible = cmp.queries;

    // Stage 4. The free pair sits below every anchor: positions 1 and 2.
    // The lowest eligible lies above every scrap element.
    let pivot = eligible_sorted[0];
    let anchors: Vec<Alternative> = eligible_sorted[eligible_sorted.len() - (k - 2)..].to_vec();
    let mut pool = scrap.clone();
    pool.sort_unstable();
    pool.push(pivot);
    let reps = majority_repetitions(pool.len(), gamma, budget);
    let mut cmp = NoisyComparator::new(oracle, anchors, working[0], working[1]);
    let (mut pool_sorted, _) = noisy_sort(&mut cmp, pool, reps)?;
    stages.sort_scrap = cmp.queries;
    if pool_sorted[0] == pivot {
        pool_sorted.reverse();
    }
    pool_sorted.retain(|&a| a != pivot);

    // Stage 5. Ascending in the working orientation, then flipped to match
    // the canonical probabilities.
    let mut ascending = pool_sorted;
    ascending.extend(eligible_sorted);
    ascending.reverse();
    let order = LatentOrder::from_ascending(ascending)?;
    let mut estimate = estimate;
    estimate.epsilon = epsilon;
    estimate.queries = stages.total();
    Ok(MixedRecovery { order, estimate, stages })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combinatorics::KSubsets;
    use crate::oracle::{MixedOracle, MixtureDistribution};
    use crate::rng::{seeded, ChoiceRng};
    use rand::Rng;

    #[test]
    fn queries_per_subset_example() {
        // ceil(2.1 / 0.01 * ln(12 / 0.05)) = ceil(210 * 5.4806)
        assert_eq!(queries_per_subset(2, 0.1, 0.05).unwrap(), 1151);
        assert!(queries_per_subset(2, 0.0, 0.05).is_err());
    }

    /// Noise-free tables for a mixture with positions in ascending order
    /// `ascending` of the (k+1)-set.
    fn exact_tables(pi: &[f64], ascending: &[Alternative]) -> Vec<Vec<(Alternative, f64)>> {
        let k = pi.len();
        let mut by_id: Vec<Alternative> = ascending.to_vec();
        by_id.sort_unstable();
        by_id
            .iter()
            .map(|&excluded| {
                let members: Vec<Alternative> = ascending.iter().copied().filter(|&a| a != excluded).collect();
                assert_eq!(members.len(), k);
                let mut t: Vec<(Alternative, f64)> = members.iter().enumerate().map(|(i, &a)| (a, pi[i])).collect();
                t.sort_unstable_by_key(|e| e.0);
                t
            })
            .collect()
    }

    fn same_up_to_reflection(a: &[f64], b: &[f64]) -> bool {
        max_error_up_to_reflection(a, b) < 1e-15
    }

    #[test]
    fn alignment_is_exact_on_exact_tables() {
        let mut rng = seeded(8);
        let mut checked = 0;
        for k in 2..=6usize {
            // Grid: integer weights 1..=8, distinct, normalized.
            for _ in 0..200 {
                let mut w: Vec<u32> = (1..=8).collect();
                for i in (1..w.len()).rev() {
                    w.swap(i, rng.random_range(0..=i));
                }
                let w = &w[..k];
                let total: u32 = w.iter().sum();
                let pi: Vec<f64> = w.iter().map(|&x| x as f64 / total as f64).collect();
                let order = LatentOrder::random(k + 1, &mut rng);
                let tables = exact_tables(&pi, order.ascending());
                let got = align_frequencies(&tables).unwrap();
                assert!(same_up_to_reflection(&got, &pi), "{pi:?} -> {got:?}");
                assert!(got[0] >= got[k - 1]);
                checked += 1;
            }
        }
        assert_eq!(checked, 1000);
    }

    #[test]
    fn alignment_rejects_scrambled_levels() {
        let ids: Vec<Alternative> = (0..4).map(Alternative).collect();
        let mut tables = exact_tables(&[0.5, 0.3, 0.2], &ids);
        // Swap two frequencies in one subset so ranks no longer line up.
        tables[1][0].1 = 0.2;
        tables[1][2].1 = 0.5;
        assert!(matches!(align_frequencies(&tables), Err(Error::AlignmentFailure(_))));
        assert!(align_frequencies(&tables[..2]).is_err());
    }

    #[test]
    fn round_winner_rule() {
        let f = |v: &[(usize, f64)]| v.iter().map(|&(a, x)| (Alternative(a), x)).collect::<Vec<_>>();
        assert_eq!(round_winner(&f(&[(0, 0.2), (1, 0.3), (2, 0.5)]), 0.5), Alternative(2));
        assert_eq!(round_winner(&f(&[(0, 0.375), (1, 0.625)]), 0.5), Alternative(1));
        assert_eq!(round_winner(&f(&[(0, 0.375), (1, 0.125), (2, 0.5)]), 0.25), Alternative(0));
    }

    #[test]
    fn round_winner_never_misses_the_top_under_bounded_error() {
        // Estimates and frequencies each off by strictly less than gamma/4
        // keep the top element nearest the estimated top probability.
        let mut rng = seeded(17);
        let pi = [0.2, 0.3, 0.5];
        let gamma = 0.1;
        for _ in 0..10_000 {
            let mut jitter = || rng.random_range(-0.0249..0.0249);
            let target = pi[2] + jitter();
            let freqs: Vec<(Alternative, f64)> =
                pi.iter().enumerate().map(|(i, p)| (Alternative(i), p + jitter())).collect();
            assert_eq!(round_winner(&freqs, target), Alternative(2));
        }
        assert!(gamma / 4.0 > 0.0249);
    }

    fn mixed(n: usize, probs: &[f64], gamma: f64, seed: u64) -> MixedOracle {
        let mut rng = seeded(seed);
        let order = LatentOrder::random(n, &mut rng);
        MixedOracle::new(order, MixtureDistribution::new(probs.to_vec(), gamma).unwrap(), seeded(seed + 1)).unwrap()
    }

    #[test]
    fn comparator_win_and_retry_rates() {
        let mut o = MixedOracle::new(
            LatentOrder::identity(3),
            MixtureDistribution::new(vec![0.2, 0.3, 0.5], 0.1).unwrap(),
            seeded(4),
        )
        .unwrap();
        let mut cmp = NoisyComparator::new(&mut o, vec![Alternative(0)], 0.3, 0.5);
        assert!((cmp.win_prob - 0.625).abs() < 1e-12);
        assert!((cmp.fail_prob - 0.2).abs() < 1e-12);
        let trials = 100_000;
        let mut max_wins = 0;
        for _ in 0..trials {
            if cmp.duel(Alternative(1), Alternative(2)).unwrap() == Alternative(2) {
                max_wins += 1;
            }
        }
        let rate = max_wins as f64 / trials as f64;
        assert!((rate - 0.625).abs() < 0.01, "{rate}");
        let retries = cmp.queries as f64 / trials as f64;
        assert!((retries - 1.25).abs() < 0.02, "{retries}");
    }

    #[test]
    fn pair_comparator_without_anchors_is_the_raw_oracle() {
        let mut o = MixedOracle::new(
            LatentOrder::identity(2),
            MixtureDistribution::new(vec![0.3, 0.7], 0.1).unwrap(),
            seeded(9),
        )
        .unwrap();
        let mut cmp = NoisyComparator::new(&mut o, vec![], 0.3, 0.7);
        assert!((cmp.win_prob - 0.7).abs() < 1e-12);
        assert_eq!(cmp.fail_prob, 0.0);
        for _ in 0..100 {
            cmp.duel(Alternative(0), Alternative(1)).unwrap();
        }
        assert_eq!(cmp.queries, 100);
    }

    /// Integer comparisons that answer correctly with a fixed probability.
    struct Biased {
        p: f64,
        rng: ChoiceRng,
        calls: u64,
    }

    impl PairComparator for Biased {
        type Item = u32;

        fn less(&mut self, a: &u32, b: &u32) -> Result<bool> {
            self.calls += 1;
            let truth = a < b;
            Ok(if self.rng.random::<f64>() < self.p { truth } else { !truth })
        }
    }

    #[test]
    fn noiseless_sort_is_exact() {
        let mut c = Biased { p: 1.0, rng: seeded(1), calls: 0 };
        let (sorted, comparisons) = noisy_sort(&mut c, (0..20).rev().collect(), 5).unwrap();
        assert_eq!(sorted, (0..20).collect::<Vec<_>>());
        assert_eq!(c.calls, comparisons * 5);
    }

    #[test]
    fn noisy_sort_recovers_twenty_items() {
        // Win probability 0.7 is 0.2 above a coin, so gamma/2 = 0.2.
        let reps = majority_repetitions(20, 0.4, 0.05);
        let mut correct = 0;
        let mut rng = seeded(77);
        for t in 0..500 {
            let mut c = Biased { p: 0.7, rng: seeded(1000 + t), calls: 0 };
            let mut items: Vec<u32> = (0..20).collect();
            for i in (1..items.len()).rev() {
                items.swap(i, rng.random_range(0..=i));
            }
            let (sorted, _) = noisy_sort(&mut c, items, reps).unwrap();
            if sorted == (0..20).collect::<Vec<_>>() {
                correct += 1;
            }
        }
        assert!(correct >= 475, "{correct}/500");
    }

    #[test]
    fn two_items_error_within_chernoff_bound() {
        let r = 500u64;
        let gamma: f64 = 0.2;
        let bound = 2.0 * (-(r as f64) * gamma * gamma / 8.0).exp();
        let mut wrong = 0;
        let trials = 2000;
        for t in 0..trials {
            let mut c = Biased { p: 0.5 + gamma / 2.0, rng: seeded(t), calls: 0 };
            let (sorted, _) = noisy_sort(&mut c, vec![1, 0], r | 1).unwrap();
            if sorted != vec![0, 1] {
                wrong += 1;
            }
        }
        assert!((wrong as f64 / trials as f64) <= bound, "{wrong} vs bound {bound}");
    }

    #[test]
    fn estimate_json_shape() {
        let e = MixtureEstimate { probs_hat: vec![0.5, 0.5], delta: 0.1, epsilon: 0.05, queries: 3 };
        assert_eq!(serde_json::to_string(&e).unwrap(), r#"{"pi":[0.5,0.5],"delta":0.1,"epsilon":0.05,"queries":3}"#);
    }

    #[test]
    fn estimate_rejects_bad_delta() {
        let mut o = mixed(10, &[0.5, 0.3, 0.2], 0.1, 1);
        assert!(estimate_mixture(&mut o, 0.1, 0.05, 0.05).is_err());
        assert!(estimate_mixture(&mut o, 0.1, 0.0, 0.05).is_err());
        assert_eq!(o.query_count(), 0);
    }

    #[test]
    fn estimate_is_close() {
        let mut o = mixed(10, &[0.5, 0.3, 0.2], 0.1, 2);
        let e = estimate_mixture(&mut o, 0.1, 0.04, 0.05).unwrap();
        assert!(e.max_error(&[0.5, 0.3, 0.2]) <= 0.04, "{e:?}");
        assert_eq!(e.queries, 4 * queries_per_subset(3, 0.04, 0.05).unwrap());
        assert_eq!(o.query_count(), e.queries);
    }

    #[test]
    fn recovers_small_mixed_instance() {
        let pi = [0.2, 0.3, 0.5];
        let mut o = mixed(12, &pi, 0.1, 3);
        let truth = o.order().clone();
        let r = recover_mixed(&mut o, 0.1, 0.1).unwrap();
        assert!(r.matches_up_to_reflection(&truth));
        assert_eq!(r.stages.total(), o.query_count());
        assert!(r.estimate.max_error(&pi) <= 0.025);
        // The recovered order and estimate share an orientation, so each
        // position predicts either itself or its mirror on the truth.
        let same_side = r.order == truth;
        for s in KSubsets::new(12, 3) {
            for ell in 1..=3 {
                let mirror = if same_side { ell } else { 4 - ell };
                assert_eq!(r.predict(ell, &s).unwrap(), select_position(&truth, s.members(), mirror));
            }
        }
    }

    #[test]
    fn recover_rejects_small_universe() {
        let mut o = mixed(5, &[0.2, 0.3, 0.5], 0.1, 3);
        assert!(matches!(recover_mixed(&mut o, 0.1, 0.1), Err(Error::Configuration(_))));
    }
}

//! Recovery from a passive stream of observed choices.
//!
//! Phase 1 records reveal the ineligible alternatives: those never chosen.
//! Phase 2 records whose set is `{u, v} + anchors` act as comparisons of
//! `u` and `v`, with `anchors` a fixed group of k-2 ineligibles. Every such
//! comparison points the same way, so the transitive closure of the
//! observed comparisons is a partial order on everything but the anchors.
//! Sets whose members are pairwise ordered are answered exactly; the rest
//! are reported as unresolved.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::choice::{evaluate, Alternative, KSet, LatentOrder, PositionSelector};
use crate::combinatorics::{binomial, unrank, KSubsets};
use crate::error::{Error, Result};
use crate::oracle::ObservationBatch;
use crate::stats::{clopper_pearson, Interval};

/// Above this many k-sets, coverage is estimated by sampling.
pub const EXHAUSTIVE_LIMIT: u128 = 1_000_000;

/// Alternatives never chosen in `batch`. More than `k - 1` of them means
/// the phase did not observe enough sets.
pub fn find_ineligible_passive(batch: &ObservationBatch, n: usize, k: usize) -> Result<BTreeSet<Alternative>> {
    let mut chosen = vec![false; n];
    for r in &batch.records {
        match chosen.get_mut(r.choice.0) {
            Some(c) => *c = true,
            None => return Err(Error::InvalidQuery(format!("{} is outside the universe of {n}", r.choice))),
        }
    }
    let never: BTreeSet<Alternative> = (0..n).filter(|&i| !chosen[i]).map(Alternative).collect();
    if never.len() > k - 1 {
        return Err(Error::InsufficientCoverage { found: never.len(), expected: k - 1 });
    }
    if never.len() < k - 1 {
        return Err(Error::InconsistentOracle(format!(
            "only {} alternatives were never chosen; a position selector leaves {}",
            never.len(),
            k - 1
        )));
    }
    Ok(never)
}

/// The k-2 smallest ids of the never-chosen set.
pub fn choose_anchors(ineligible: &BTreeSet<Alternative>, k: usize) -> Vec<Alternative> {
    ineligible.iter().copied().take(k.saturating_sub(2)).collect()
}

/// Directed comparisons among the non-anchor alternatives; an edge runs
/// from the loser to the winner of an anchored record.
#[derive(Debug, Clone)]
pub struct ComparisonGraph {
    vertices: Vec<Alternative>,
    index: Vec<Option<usize>>,
    edges: BTreeMap<(usize, usize), bool>,
}

impl ComparisonGraph {
    /// Extracts every record of the form `{u, v} + anchors`.
    pub fn from_batch(batch: &ObservationBatch, n: usize, anchors: &[Alternative]) -> Result<Self> {
        let anchor_set: BTreeSet<Alternative> = anchors.iter().copied().collect();
        let vertices: Vec<Alternative> = (0..n).map(Alternative).filter(|a| !anchor_set.contains(a)).collect();
        let mut index = vec![None; n];
        for (i, a) in vertices.iter().enumerate() {
            index[a.0] = Some(i);
        }
        let mut graph = ComparisonGraph { vertices, index, edges: BTreeMap::new() };
        for r in &batch.records {
            if r.set.len() != anchors.len() + 2 || !anchors.iter().all(|&a| r.set.contains(a)) {
                continue;
            }
            let free: Vec<Alternative> = r.set.iter().filter(|a| !anchor_set.contains(a)).collect();
            if !free.contains(&r.choice) {
                return Err(Error::InconsistentOracle(format!("anchor {} was chosen", r.choice)));
            }
            let loser = if free[0] == r.choice { free[1] } else { free[0] };
            graph.add(loser, r.choice)?;
        }
        Ok(graph)
    }

    /// Builds a graph directly from `(loser, winner)` pairs.
    pub fn from_edges(n: usize, anchors: &[Alternative], edges: &[(Alternative, Alternative)]) -> Result<Self> {
        let mut graph = Self::from_batch(&ObservationBatch::default(), n, anchors)?;
        for &(loser, winner) in edges {
            graph.add(loser, winner)?;
        }
        Ok(graph)
    }

    fn vertex(&self, a: Alternative) -> Result<usize> {
        self.index
            .get(a.0)
            .copied()
            .flatten()
            .ok_or_else(|| Error::InvalidQuery(format!("{a} is not a comparison vertex")))
    }

    fn add(&mut self, loser: Alternative, winner: Alternative) -> Result<()> {
        let (l, w) = (self.vertex(loser)?, self.vertex(winner)?);
        // Key by the unordered pair; the flag says whether the smaller index won.
        let (key, low_wins) = if l < w { ((l, w), false) } else { ((w, l), true) };
        match self.edges.insert(key, low_wins) {
            Some(prev) if prev != low_wins => Err(Error::InconsistentStream(loser, winner)),
            _ => Ok(()),
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Transitive closure by a depth-first search from every vertex.
    pub fn closure(&self) -> Result<InferredPartialOrder> {
        let v = self.vertices.len();
        let mut adjacency = vec![Vec::new(); v];
        for (&(a, b), &low_wins) in &self.edges {
            if low_wins {
                adjacency[b].push(a);
            } else {
                adjacency[a].push(b);
            }
        }
        let words = v.div_ceil(64);
        let mut above = vec![vec![0u64; words]; v];
        let mut stack = Vec::new();
        for (start, row) in above.iter_mut().enumerate() {
            stack.clear();
            stack.extend(adjacency[start].iter().copied());
            while let Some(x) = stack.pop() {
                let (w, bit) = (x / 64, 1u64 << (x % 64));
                if row[w] & bit == 0 {
                    row[w] |= bit;
                    stack.extend(adjacency[x].iter().copied());
                }
            }
        }
        for (i, row) in above.iter().enumerate() {
            if row[i / 64] & (1 << (i % 64)) != 0 {
                let j = adjacency[i][0];
                return Err(Error::InconsistentStream(self.vertices[i], self.vertices[j]));
            }
        }
        Ok(InferredPartialOrder { vertices: self.vertices.clone(), index: self.index.clone(), above })
    }
}

/// Reachability over the comparison vertices: `u < v` when a chain of
/// observed comparisons leads from `u` up to `v`.
#[derive(Debug, Clone)]
pub struct InferredPartialOrder {
    vertices: Vec<Alternative>,
    index: Vec<Option<usize>>,
    above: Vec<Vec<u64>>,
}

impl InferredPartialOrder {
    fn idx(&self, a: Alternative) -> Option<usize> {
        self.index.get(a.0).copied().flatten()
    }

    fn reaches(&self, i: usize, j: usize) -> bool {
        self.above[i][j / 64] & (1 << (j % 64)) != 0
    }

    pub fn contains(&self, a: Alternative) -> bool {
        self.idx(a).is_some()
    }

    pub fn vertices(&self) -> &[Alternative] {
        &self.vertices
    }

    /// `Some(true)` if `u` is inferred below `v`, `Some(false)` if above,
    /// `None` if the pair is unresolved or either is not a vertex.
    pub fn below(&self, u: Alternative, v: Alternative) -> Option<bool> {
        let (i, j) = (self.idx(u)?, self.idx(v)?);
        if self.reaches(i, j) {
            Some(true)
        } else if self.reaches(j, i) {
            Some(false)
        } else {
            None
        }
    }

    /// Number of vertex pairs left unordered.
    pub fn unresolved_pairs(&self) -> u64 {
        let v = self.vertices.len() as u64;
        let resolved: u64 = self.above.iter().map(|row| row.iter().map(|w| w.count_ones() as u64).sum::<u64>()).sum();
        v * v.saturating_sub(1) / 2 - resolved
    }

    pub fn unresolved_fraction(&self) -> f64 {
        let v = self.vertices.len() as u64;
        let pairs = v * v.saturating_sub(1) / 2;
        if pairs == 0 {
            0.0
        } else {
            self.unresolved_pairs() as f64 / pairs as f64
        }
    }

    /// Members of `s` in inferred ascending order, if every pair is ordered.
    pub fn sort_members(&self, s: &KSet) -> Option<Vec<Alternative>> {
        let idx: Vec<usize> = s.iter().map(|a| self.idx(a)).collect::<Option<_>>()?;
        let mut ranked: Vec<(usize, Alternative)> = Vec::with_capacity(idx.len());
        for (a, &i) in s.iter().zip(&idx) {
            let mut below = 0;
            for &j in &idx {
                if i == j {
                    continue;
                }
                if self.reaches(j, i) {
                    below += 1;
                } else if !self.reaches(i, j) {
                    return None;
                }
            }
            ranked.push((below, a));
        }
        ranked.sort_unstable();
        Some(ranked.into_iter().map(|(_, a)| a).collect())
    }
}

/// Result of answering one set from passive data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PassiveAnswer {
    Choice(Alternative),
    Unresolved,
}

/// Everything recovered from the two phases.
#[derive(Debug, Clone)]
pub struct PassiveModel {
    pub k: usize,
    pub ell: usize,
    pub ineligible: BTreeSet<Alternative>,
    pub anchors: Vec<Alternative>,
    pub order: InferredPartialOrder,
    /// Position to select in the inferred ascending order: `ell` or
    /// `k - ell + 1`, fixed by an observed record. `None` when no record
    /// could decide it.
    pub reading: Option<usize>,
    pub comparisons: usize,
}

impl PassiveModel {
    pub fn answer(&self, s: &KSet) -> PassiveAnswer {
        if s.len() != self.k {
            return PassiveAnswer::Unresolved;
        }
        let mirrored = self.k - self.ell + 1;
        let position = match self.reading {
            Some(p) => p,
            None if mirrored == self.ell => self.ell,
            None => return PassiveAnswer::Unresolved,
        };
        match self.order.sort_members(s) {
            Some(sorted) => PassiveAnswer::Choice(sorted[position - 1]),
            None => PassiveAnswer::Unresolved,
        }
    }
}

/// Infers the partial order from phase-2 comparisons.
pub fn build_partial_order(batch2: &ObservationBatch, n: usize, anchors: &[Alternative]) -> Result<InferredPartialOrder> {
    ComparisonGraph::from_batch(batch2, n, anchors)?.closure()
}

/// Full passive pipeline for a known `2 <= ell <= k-1`.
pub fn recover_passive(
    batch1: &ObservationBatch,
    batch2: &ObservationBatch,
    n: usize,
    k: usize,
    ell: usize,
) -> Result<PassiveModel> {
    if k < 3 || ell < 2 || ell > k - 1 {
        return Err(Error::Configuration(format!("passive recovery needs 2 <= ell <= k - 1 (k = {k}, ell = {ell})")));
    }
    if n < k + 1 {
        return Err(Error::Configuration(format!("need n >= k + 1 (n = {n}, k = {k})")));
    }
    let ineligible = find_ineligible_passive(batch1, n, k)?;
    let anchors = choose_anchors(&ineligible, k);
    let graph = ComparisonGraph::from_batch(batch2, n, &anchors)?;
    let comparisons = graph.edge_count();
    let order = graph.closure()?;

    // Whether the anchored comparison read winners as the larger or the
    // smaller element depends on which side the leftover ineligible sits.
    // Any fully ordered observed record settles it.
    let mirrored = k - ell + 1;
    let mut reading = None;
    if mirrored != ell {
        for r in batch1.records.iter().chain(&batch2.records) {
            let Some(sorted) = order.sort_members(&r.set) else { continue };
            if sorted[ell - 1] == r.choice {
                reading = Some(ell);
            } else if sorted[mirrored - 1] == r.choice {
                reading = Some(mirrored);
            } else {
                return Err(Error::InconsistentOracle(format!(
                    "record choice {} fits neither position {ell} nor {mirrored}",
                    r.choice
                )));
            }
            break;
        }
    } else {
        reading = Some(ell);
    }
    Ok(PassiveModel { k, ell, ineligible, anchors, order, reading, comparisons })
}

/// Scores a passive model against ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub evaluated: u64,
    pub correct: u64,
    pub unresolved: u64,
    /// Answers given that disagree with ground truth.
    pub wrong: u64,
    pub exhaustive: bool,
    pub frac_correct: f64,
    pub frac_unresolved: f64,
    /// 95% interval on the fraction correct.
    pub interval: Interval,
}

/// Unresolved answers count as incorrect. Exhaustive when the number of
/// k-sets is at most [`EXHAUSTIVE_LIMIT`], otherwise `sample_size` sets
/// drawn uniformly with replacement.
pub fn coverage_report<R: Rng + ?Sized>(
    model: &PassiveModel,
    selector: PositionSelector,
    truth: &LatentOrder,
    sample_size: u64,
    rng: &mut R,
) -> Result<CoverageReport> {
    let n = truth.len();
    let total = binomial(n as u64, model.k as u64);
    let (mut correct, mut unresolved, mut wrong, mut evaluated) = (0u64, 0u64, 0u64, 0u64);
    let mut score = |s: &KSet| -> Result<()> {
        evaluated += 1;
        match model.answer(s) {
            PassiveAnswer::Unresolved => unresolved += 1,
            PassiveAnswer::Choice(a) if a == evaluate(selector, truth, s)? => correct += 1,
            PassiveAnswer::Choice(_) => wrong += 1,
        }
        Ok(())
    };
    let exhaustive = total <= EXHAUSTIVE_LIMIT;
    if exhaustive {
        for s in KSubsets::new(n, model.k) {
            score(&s)?;
        }
    } else {
        for _ in 0..sample_size {
            score(&unrank(rng.random_range(0..total), n, model.k))?;
        }
    }
    let frac = |x: u64| if evaluated == 0 { 0.0 } else { x as f64 / evaluated as f64 };
    Ok(CoverageReport {
        evaluated,
        correct,
        unresolved,
        wrong,
        exhaustive,
        frac_correct: frac(correct),
        frac_unresolved: frac(unresolved),
        interval: clopper_pearson(correct, evaluated, 0.95),
    })
}

/// Summary emitted by passive runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassiveSummary {
    pub n: usize,
    pub k: usize,
    pub ell: usize,
    pub b: Option<f64>,
    pub frac_correct: f64,
    pub frac_unresolved: f64,
    pub p1: f64,
    pub p2: f64,
}

/// Number of k-sets that choose the element with `rank` alternatives below
/// it: `C(rank, ell-1) * C(n-1-rank, k-ell)`.
pub fn revealing_count(n: usize, k: usize, ell: usize, rank: usize) -> u128 {
    if rank >= n {
        return 0;
    }
    binomial(rank as u64, (ell - 1) as u64) * binomial((n - 1 - rank) as u64, (k - ell) as u64)
}

/// Fewest revealing sets over all eligible elements.
pub fn min_revealing_count(n: usize, k: usize, ell: usize) -> u128 {
    (ell - 1..=n - k + ell - 1).map(|r| revealing_count(n, k, ell, r)).min().unwrap_or(0)
}


#[cfg(test)]
mod properties {
    use super::*;
    use crate::oracle::{sample_phase, DeterministicOracle, Phase, StreamConfig};
    use crate::rng::seeded;
    use proptest::prelude::*;
    use rand::Rng;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn closure_is_sound_and_transitive(n in 3usize..25, seed in any::<u64>(), density in 0.0f64..1.0) {
            let mut rng = seeded(seed);
            let order = LatentOrder::random(n, &mut rng);
            let mut edges = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    if rng.random::<f64>() < density {
                        let (u, v) = (Alternative(i), Alternative(j));
                        edges.push(if order.rank(u) < order.rank(v) { (u, v) } else { (v, u) });
                    }
                }
            }
            let closure = ComparisonGraph::from_edges(n, &[], &edges).unwrap().closure().unwrap();
            for &(loser, winner) in &edges {
                prop_assert_eq!(closure.below(loser, winner), Some(true));
            }
            let all: Vec<Alternative> = (0..n).map(Alternative).collect();
            for &a in &all {
                for &b in &all {
                    if let Some(true) = closure.below(a, b) {
                        prop_assert!(order.rank(a) < order.rank(b));
                        prop_assert_eq!(closure.below(b, a), Some(false));
                        for &c in &all {
                            if closure.below(b, c) == Some(true) {
                                prop_assert_eq!(closure.below(a, c), Some(true));
                            }
                        }
                    }
                }
            }
        }

        #[test]
        fn passive_answers_are_never_wrong(
            (n, k, ell) in (3usize..6).prop_flat_map(|k| (k + 1..12, Just(k), 2..k)),
            p1 in 0.2f64..1.0,
            p2 in 0.05f64..1.0,
            seed in any::<u64>(),
        ) {
            let mut rng = seeded(seed);
            let order = LatentOrder::random(n, &mut rng);
            let selector = PositionSelector::new(k, ell).unwrap();
            let mut oracle = DeterministicOracle::new(selector, order.clone()).unwrap();
            let config = StreamConfig::from_probabilities(p1, p2).unwrap();
            let b1 = sample_phase(&config, Phase::One, &mut oracle, &mut rng).unwrap();
            let b2 = sample_phase(&config, Phase::Two, &mut oracle, &mut rng).unwrap();
            match recover_passive(&b1, &b2, n, k, ell) {
                Ok(model) => {
                    let report = coverage_report(&model, selector, &order, 0, &mut rng).unwrap();
                    prop_assert_eq!(report.wrong, 0);
                }
                Err(Error::InsufficientCoverage { .. }) => {}
                Err(e) => prop_assert!(false, "unexpected error {e}"),
            }
        }
    }
}

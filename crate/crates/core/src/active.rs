//! Active recovery of a deterministic position selector.
//!
//! Recovery runs in four query phases:
//!
//! 1. **Discard.** Starting from an arbitrary k-set, repeatedly replace the
//!    chosen alternative with a fresh one. After `n - k + 1` queries the
//!    k-1 alternatives left unchosen are exactly the ineligible ones.
//! 2. **Sort.** Padding a pair `{u, v}` with k-2 ineligibles leaves two open
//!    positions, so the answer is a binary comparison whose direction is the
//!    same for every pair. The eligibles are merge-sorted with it, treating
//!    the winner as the larger element.
//! 3. **Position.** One query on the k lowest eligibles reveals `ell` in the
//!    inferred orientation.
//! 4. **Classify.** Each ineligible is placed below or above all eligibles
//!    with one query, needed only when `2 <= ell <= k-1`.
//!
//! Nothing before phase 3 depends on `ell`; the algorithm only sees answers.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::choice::{Alternative, KSet};
use crate::combinatorics::log2_factorial;
use crate::error::{Error, Result};
use crate::oracle::ChoiceOracle;
use crate::sorting::merge_sort_by;

/// Query phase of an active recovery run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QueryPhase {
    Discard,
    Sort,
    Position,
    Classify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Unknown,
    Bottom,
    Eligible(usize),
    Top,
}

/// Everything needed to answer any k-set without further queries.
///
/// All positions are relative to an arbitrary orientation; reversing
/// `eligible_order`, swapping `top` and `bottom` and mapping
/// `ell -> k - ell + 1` describes the same choice function.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ModelRepr", into = "ModelRepr")]
pub struct RecoveredModel {
    eligible_order: Vec<Alternative>,
    ell_hat: usize,
    top: Vec<Alternative>,
    bottom: Vec<Alternative>,
    slots: Vec<Slot>,
}

#[derive(Serialize, Deserialize)]
struct ModelRepr {
    order: Vec<Alternative>,
    ell: usize,
    top: Vec<Alternative>,
    bottom: Vec<Alternative>,
}

impl From<RecoveredModel> for ModelRepr {
    fn from(m: RecoveredModel) -> Self {
        ModelRepr { order: m.eligible_order, ell: m.ell_hat, top: m.top, bottom: m.bottom }
    }
}

impl TryFrom<ModelRepr> for RecoveredModel {
    type Error = Error;

    fn try_from(r: ModelRepr) -> Result<Self> {
        RecoveredModel::new(r.order, r.ell, r.bottom, r.top)
    }
}

impl RecoveredModel {
    pub fn new(
        eligible_order: Vec<Alternative>,
        ell_hat: usize,
        mut bottom: Vec<Alternative>,
        mut top: Vec<Alternative>,
    ) -> Result<Self> {
        let k = bottom.len() + top.len() + 1;
        if ell_hat == 0 || ell_hat > k {
            return Err(Error::Configuration(format!("ell = {ell_hat} outside [1, {k}]")));
        }
        if bottom.len() != ell_hat - 1 || top.len() != k - ell_hat {
            return Err(Error::Configuration(format!(
                "{} bottom and {} top ineligibles do not fit ell = {ell_hat}, k = {k}",
                bottom.len(),
                top.len()
            )));
        }
        bottom.sort_unstable();
        top.sort_unstable();
        let n = eligible_order.len() + k - 1;
        let mut slots = vec![Slot::Unknown; n];
        let mut place = |a: Alternative, slot: Slot| -> Result<()> {
            match slots.get_mut(a.0) {
                Some(s @ Slot::Unknown) => {
                    *s = slot;
                    Ok(())
                }
                _ => Err(Error::Configuration(format!("{a} is repeated or outside [0, {n})"))),
            }
        };
        for (i, &a) in eligible_order.iter().enumerate() {
            place(a, Slot::Eligible(i))?;
        }
        for &a in &bottom {
            place(a, Slot::Bottom)?;
        }
        for &a in &top {
            place(a, Slot::Top)?;
        }
        Ok(RecoveredModel { eligible_order, ell_hat, top, bottom, slots })
    }

    pub fn k(&self) -> usize {
        self.top.len() + self.bottom.len() + 1
    }

    pub fn universe_size(&self) -> usize {
        self.slots.len()
    }

    pub fn eligible_order(&self) -> &[Alternative] {
        &self.eligible_order
    }

    pub fn ell_hat(&self) -> usize {
        self.ell_hat
    }

    /// Ineligibles above every eligible, in the inferred orientation.
    pub fn top_ineligible(&self) -> &[Alternative] {
        &self.top
    }

    /// Ineligibles below every eligible, in the inferred orientation.
    pub fn bottom_ineligible(&self) -> &[Alternative] {
        &self.bottom
    }

    /// The same choice function described in the opposite orientation.
    pub fn reflected(&self) -> Self {
        let mut order = self.eligible_order.clone();
        order.reverse();
        RecoveredModel::new(order, self.k() - self.ell_hat + 1, self.top.clone(), self.bottom.clone())
            .expect("reflection preserves model invariants")
    }

    /// Predicts `f(s)` without touching the oracle.
    pub fn predict(&self, s: &KSet) -> Result<Alternative> {
        let k = self.k();
        if s.len() != k {
            return Err(Error::InvalidQuery(format!("expected a {k}-set, got {} members", s.len())));
        }
        let mut below = 0usize;
        let mut eligible: Vec<(usize, Alternative)> = Vec::with_capacity(k);
        for a in s.iter() {
            match self.slots.get(a.0).copied().unwrap_or(Slot::Unknown) {
                Slot::Unknown => {
                    return Err(Error::InvalidQuery(format!("{a} is unknown to the model")));
                }
                Slot::Bottom => below += 1,
                Slot::Top => {}
                Slot::Eligible(pos) => eligible.push((pos, a)),
            }
        }
        // At most ell-1 bottoms exist and at most k-ell tops, so the selected
        // position always lands on an eligible member.
        eligible.sort_unstable();
        let idx = self.ell_hat - 1 - below;
        Ok(eligible[idx].1)
    }
}

/// Counts of queries per phase for one recovery.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecoveryStats {
    pub discard: u64,
    pub sort: u64,
    pub position: u64,
    pub classify: u64,
    /// Phase of every query in issue order.
    pub phases: Vec<QueryPhase>,
}

impl RecoveryStats {
    pub fn total(&self) -> u64 {
        self.discard + self.sort + self.position + self.classify
    }

    fn record(&mut self, phase: QueryPhase) {
        match phase {
            QueryPhase::Discard => self.discard += 1,
            QueryPhase::Sort => self.sort += 1,
            QueryPhase::Position => self.position += 1,
            QueryPhase::Classify => self.classify += 1,
        }
        self.phases.push(phase);
    }
}

#[derive(Debug, Clone)]
pub struct Recovery {
    pub model: RecoveredModel,
    pub stats: RecoveryStats,
}

fn ask<O: ChoiceOracle>(oracle: &mut O, stats: &mut RecoveryStats, phase: QueryPhase, s: &KSet) -> Result<Alternative> {
    let a = oracle.query(s)?;
    if !s.contains(a) {
        return Err(Error::InconsistentOracle(format!("answer {a} is not a member of {s:?}")));
    }
    stats.record(phase);
    Ok(a)
}

fn discard_phase<O: ChoiceOracle>(oracle: &mut O, stats: &mut RecoveryStats) -> Result<BTreeSet<Alternative>> {
    let (n, k) = (oracle.universe_size(), oracle.k());
    if n < k + 1 {
        return Err(Error::Configuration(format!("discard needs n >= k + 1 (n = {n}, k = {k})")));
    }
    let mut current: Vec<Alternative> = (0..k).map(Alternative).collect();
    let mut fresh = (k..n).map(Alternative);
    loop {
        let s = KSet::new(current.clone())?;
        let chosen = ask(oracle, stats, QueryPhase::Discard, &s)?;
        current.retain(|&a| a != chosen);
        match fresh.next() {
            Some(u) => current.push(u),
            None => return Ok(current.into_iter().collect()),
        }
    }
}

/// Finds the k-1 never-chosen alternatives in exactly `n - k + 1` queries.
pub fn discard_ineligible<O: ChoiceOracle>(oracle: &mut O) -> Result<BTreeSet<Alternative>> {
    discard_phase(oracle, &mut RecoveryStats::default())
}

/// Recovers the full choice function in `O(n log n)` queries.
///
/// Requires `n >= k + 1` and `n - k + 1 >= k`, so that the position query
/// has k eligibles to work with.
pub fn recover_choice_function<O: ChoiceOracle>(oracle: &mut O) -> Result<Recovery> {
    let (n, k) = (oracle.universe_size(), oracle.k());
    if n < k + 1 || n + 1 < 2 * k {
        return Err(Error::Configuration(format!(
            "active recovery needs n >= max(k + 1, 2k - 1) (n = {n}, k = {k})"
        )));
    }
    let mut stats = RecoveryStats::default();

    let ineligible = discard_phase(oracle, &mut stats)?;
    let padding: Vec<Alternative> = ineligible.iter().copied().take(k - 2).collect();
    let eligible: Vec<Alternative> = (0..n).map(Alternative).filter(|a| !ineligible.contains(a)).collect();

    // The winner of a padded pair is taken to be the larger element.
    let (eligible_order, _) = merge_sort_by(eligible, |&u, &v| {
        let mut members = padding.clone();
        members.extend([u, v]);
        let s = KSet::new(members)?;
        let winner = ask(oracle, &mut stats, QueryPhase::Sort, &s)?;
        if winner != u && winner != v {
            return Err(Error::InconsistentOracle(format!("padded comparison returned padding element {winner}")));
        }
        Ok(winner == v)
    })?;

    let lowest = KSet::new(eligible_order[..k].to_vec())?;
    let pick = ask(oracle, &mut stats, QueryPhase::Position, &lowest)?;
    let ell_hat = eligible_order[..k]
        .iter()
        .position(|&a| a == pick)
        .map(|i| i + 1)
        .expect("answer is a member of the queried set");

    let (bottom, top) = if ell_hat == 1 {
        (Vec::new(), ineligible.iter().copied().collect())
    } else if ell_hat == k {
        (ineligible.iter().copied().collect(), Vec::new())
    } else {
        // With x below all eligibles the ell_hat-th smallest of
        // {x} + (k-1 lowest eligibles) is eligible number ell_hat - 2;
        // with x above, it is number ell_hat - 1.
        let probe = &eligible_order[..k - 1];
        let mut bottom = Vec::new();
        let mut top = Vec::new();
        for &x in &ineligible {
            let mut members = probe.to_vec();
            members.push(x);
            let s = KSet::new(members)?;
            let answer = ask(oracle, &mut stats, QueryPhase::Classify, &s)?;
            if answer == probe[ell_hat - 2] {
                bottom.push(x);
            } else if answer == probe[ell_hat - 1] {
                top.push(x);
            } else {
                return Err(Error::InconsistentOracle(format!(
                    "classification query for {x} returned {answer}"
                )));
            }
        }
        (bottom, top)
    };

    let model = RecoveredModel::new(eligible_order, ell_hat, bottom, top).map_err(|e| {
        Error::InconsistentOracle(format!("answers do not describe a position selector: {e}"))
    })?;
    Ok(Recovery { model, stats })
}

/// Result of the `k + 1` query type classification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeClassification {
    /// `min(ell, k - ell + 1)`.
    pub canonical_position: usize,
    pub queries: u64,
    /// How often each distinct answer occurred.
    pub answer_counts: BTreeMap<Alternative, usize>,
}

/// Queries every k-subset of a (k+1)-set witness. Exactly two answers
/// occur; the rarer one's frequency is `ell` up to reflection.
pub fn classify_type<O: ChoiceOracle>(oracle: &mut O, witness: &KSet) -> Result<TypeClassification> {
    let k = oracle.k();
    if witness.len() != k + 1 {
        return Err(Error::Configuration(format!(
            "witness must have k + 1 = {} members, got {}",
            k + 1,
            witness.len()
        )));
    }
    let mut answer_counts: BTreeMap<Alternative, usize> = BTreeMap::new();
    let mut queries = 0;
    for excluded in witness.iter() {
        let subset = KSet::new(witness.iter().filter(|&a| a != excluded).collect())?;
        let a = oracle.query(&subset)?;
        queries += 1;
        *answer_counts.entry(a).or_default() += 1;
    }
    if answer_counts.len() != 2 {
        return Err(Error::InconsistentOracle(format!(
            "expected exactly two distinct answers over the witness, saw {}",
            answer_counts.len()
        )));
    }
    let canonical_position = *answer_counts.values().min().expect("two entries");
    Ok(TypeClassification { canonical_position, queries, answer_counts })
}

/// Information-theoretic floor on the query count: `log_k((n - k)! / 2)`.
pub fn query_lower_bound(n: usize, k: usize) -> f64 {
    if n <= k {
        return 0.0;
    }
    ((log2_factorial((n - k) as u64) - 1.0) / (k as f64).log2()).max(0.0)
}

//! Universes, latent one-dimensional orders, k-sets and position selectors.
//!
//! A position selector `q(k, ell)` returns the `ell`-th smallest member of a
//! k-set under the latent order, with `ell = 1` the minimum and `ell = k` the
//! maximum. Only the induced order of the hidden embedding is stored, since
//! every function here is comparison-based.

use std::collections::BTreeSet;
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

/// An element of the universe `[0, n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Alternative(pub usize);

impl Alternative {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for Alternative {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "u{}", self.0)
    }
}

impl From<usize> for Alternative {
    fn from(id: usize) -> Self {
        Alternative(id)
    }
}

/// The hidden order of the universe, stored as a rank permutation.
///
/// Serializes as the JSON array of ids in ascending order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "Vec<Alternative>", try_from = "Vec<Alternative>")]
pub struct LatentOrder {
    rank: Vec<usize>,
    ascending: Vec<Alternative>,
}

impl LatentOrder {
    /// Builds the order from ids listed from the embedding minimum upward.
    pub fn from_ascending(ascending: Vec<Alternative>) -> Result<Self> {
        let n = ascending.len();
        let mut rank = vec![usize::MAX; n];
        for (r, a) in ascending.iter().enumerate() {
            if a.0 >= n || rank[a.0] != usize::MAX {
                return Err(Error::Configuration(format!(
                    "order is not a permutation of [0, {n}): offending id {}",
                    a.0
                )));
            }
            rank[a.0] = r;
        }
        Ok(LatentOrder { rank, ascending })
    }

    /// `u0 < u1 < ... < u(n-1)`.
    pub fn identity(n: usize) -> Self {
        LatentOrder {
            rank: (0..n).collect(),
            ascending: (0..n).map(Alternative).collect(),
        }
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut ascending: Vec<Alternative> = (0..n).map(Alternative).collect();
        ascending.shuffle(rng);
        Self::from_ascending(ascending).expect("shuffle of a permutation is a permutation")
    }

    pub fn len(&self) -> usize {
        self.rank.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rank.is_empty()
    }

    #[inline]
    pub fn rank(&self, a: Alternative) -> usize {
        self.rank[a.0]
    }

    /// The alternative holding rank `r` (0 = minimum).
    #[inline]
    pub fn at_rank(&self, r: usize) -> Alternative {
        self.ascending[r]
    }

    pub fn ascending(&self) -> &[Alternative] {
        &self.ascending
    }

    pub fn reversed(&self) -> Self {
        let mut ascending = self.ascending.clone();
        ascending.reverse();
        Self::from_ascending(ascending).expect("reversal of a permutation is a permutation")
    }

    pub fn contains(&self, a: Alternative) -> bool {
        a.0 < self.rank.len()
    }
}

impl From<LatentOrder> for Vec<Alternative> {
    fn from(order: LatentOrder) -> Self {
        order.ascending
    }
}

impl TryFrom<Vec<Alternative>> for LatentOrder {
    type Error = Error;

    fn try_from(ascending: Vec<Alternative>) -> Result<Self> {
        Self::from_ascending(ascending)
    }
}

/// A set of distinct alternatives, kept sorted by id.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "Vec<Alternative>", try_from = "Vec<Alternative>")]
pub struct KSet {
    members: Vec<Alternative>,
}

impl KSet {
    /// Sorts `members` and rejects duplicates.
    pub fn new(mut members: Vec<Alternative>) -> Result<Self> {
        members.sort_unstable();
        if members.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidQuery(format!(
                "set contains a repeated alternative: {members:?}"
            )));
        }
        Ok(KSet { members })
    }

    pub fn from_ids<I: IntoIterator<Item = usize>>(ids: I) -> Result<Self> {
        Self::new(ids.into_iter().map(Alternative).collect())
    }

    /// Caller guarantees `members` is strictly increasing.
    pub(crate) fn from_sorted_unchecked(members: Vec<Alternative>) -> Self {
        debug_assert!(members.windows(2).all(|w| w[0] < w[1]));
        KSet { members }
    }

    pub fn members(&self) -> &[Alternative] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, a: Alternative) -> bool {
        self.members.binary_search(&a).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = Alternative> + '_ {
        self.members.iter().copied()
    }
}

impl From<KSet> for Vec<Alternative> {
    fn from(s: KSet) -> Self {
        s.members
    }
}

impl TryFrom<Vec<Alternative>> for KSet {
    type Error = Error;

    fn try_from(members: Vec<Alternative>) -> Result<Self> {
        let sorted = members.windows(2).all(|w| w[0] < w[1]);
        if !sorted {
            return Err(Error::InvalidQuery(format!(
                "serialized set must be strictly increasing: {members:?}"
            )));
        }
        Ok(KSet { members })
    }
}

/// The comparison-based choice function `q(k, ell)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PositionSelector {
    k: usize,
    ell: usize,
}

impl PositionSelector {
    pub fn new(k: usize, ell: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::Configuration(format!("set size k = {k} must be at least 2")));
        }
        if ell == 0 || ell > k {
            return Err(Error::Configuration(format!("position ell = {ell} outside [1, {k}]")));
        }
        Ok(PositionSelector { k, ell })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    /// The same choices, read against the reversed order.
    pub fn reflected(&self) -> Self {
        PositionSelector { k: self.k, ell: self.k - self.ell + 1 }
    }

    /// Representative of the reflection class: `min(ell, k - ell + 1)`.
    pub fn canonical_position(&self) -> usize {
        self.ell.min(self.k - self.ell + 1)
    }

    pub fn exhibits_choice_set_effects(&self) -> bool {
        2 <= self.ell && self.ell < self.k
    }
}

/// Ground-truth evaluation: the `ell`-th smallest member of `s`.
pub fn evaluate(selector: PositionSelector, order: &LatentOrder, s: &KSet) -> Result<Alternative> {
    if s.len() != selector.k() {
        return Err(Error::InvalidQuery(format!(
            "set of size {} sent to a selector over {}-sets",
            s.len(),
            selector.k()
        )));
    }
    if let Some(a) = s.iter().find(|a| !order.contains(*a)) {
        return Err(Error::InvalidQuery(format!("{a} is outside the universe")));
    }
    Ok(select_position(order, s.members(), selector.ell()))
}

/// `ell`-th smallest (1-based) of `members` under `order`; no validation.
pub(crate) fn select_position(order: &LatentOrder, members: &[Alternative], ell: usize) -> Alternative {
    let mut ranks: SmallVec<[usize; 16]> = members.iter().map(|&a| order.rank(a)).collect();
    let (_, nth, _) = ranks.select_nth_unstable(ell - 1);
    order.at_rank(*nth)
}

/// The `k - 1` alternatives no k-set ever returns: the `ell - 1` global
/// minima and the `k - ell` global maxima.
pub fn ineligible_set(selector: PositionSelector, order: &LatentOrder) -> Result<BTreeSet<Alternative>> {
    let n = order.len();
    let (k, ell) = (selector.k(), selector.ell());
    if n < k {
        return Err(Error::Configuration(format!("universe of {n} has no {k}-sets")));
    }
    let asc = order.ascending();
    Ok(asc[..ell - 1]
        .iter()
        .chain(&asc[n - (k - ell)..])
        .copied()
        .collect())
}


#[cfg(test)]
mod properties {
    use super::*;
    use crate::rng::seeded;
    use proptest::prelude::*;
    use rand::seq::index::sample;

    fn instance() -> impl Strategy<Value = (usize, usize, usize, u64)> {
        (2usize..7).prop_flat_map(|k| (Just(k), 1..=k, k..20, any::<u64>())).prop_map(|(k, ell, n, seed)| (n, k, ell, seed))
    }

    proptest! {
        #[test]
        fn reflection_preserves_choices((n, k, ell, seed) in instance()) {
            let mut rng = seeded(seed);
            let order = LatentOrder::random(n, &mut rng);
            let s = KSet::from_ids(sample(&mut rng, n, k).into_iter()).unwrap();
            let q = PositionSelector::new(k, ell).unwrap();
            let chosen = evaluate(q, &order, &s).unwrap();
            prop_assert!(s.contains(chosen));
            prop_assert_eq!(chosen, evaluate(q.reflected(), &order.reversed(), &s).unwrap());
            let below = s.iter().filter(|&a| order.rank(a) < order.rank(chosen)).count();
            prop_assert_eq!(below, ell - 1);
        }

        #[test]
        fn ineligible_set_has_k_minus_one_members((n, k, ell, seed) in instance()) {
            let order = LatentOrder::random(n, &mut seeded(seed));
            let q = PositionSelector::new(k, ell).unwrap();
            let ineligible = ineligible_set(q, &order).unwrap();
            prop_assert_eq!(ineligible.len(), k - 1);
            prop_assert_eq!(ineligible, ineligible_set(q.reflected(), &order.reversed()).unwrap());
        }
    }
}

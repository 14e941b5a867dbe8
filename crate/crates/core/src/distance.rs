//! Choice procedures that only compare pairwise distances between embedded
//! alternatives, and the sorting of all pairwise distances by a pair oracle.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::choice::{Alternative, KSet};
use crate::combinatorics::binomial;
use crate::error::{Error, Result};
use crate::sorting::merge_sort_by;

/// Two distances closer than this are treated as tied.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Points `0..n` in a common Euclidean space.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricPoints {
    dim: usize,
    coords: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct PointsFile {
    dim: usize,
    points: BTreeMap<String, Vec<f64>>,
}

impl MetricPoints {
    /// Requires general position: no two pairwise distances within
    /// [`TIE_TOLERANCE`] of each other.
    pub fn new(coords: Vec<Vec<f64>>) -> Result<Self> {
        let points = Self::new_allowing_ties(coords)?;
        let mut all: Vec<(f64, PairId)> = points.all_pairs().into_iter().map(|p| (points.distance_of(p), p)).collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0));
        if let Some(w) = all.windows(2).find(|w| w[1].0 - w[0].0 < TIE_TOLERANCE) {
            return Err(Error::Ambiguity(format!(
                "pairs {} and {} are both at distance {}",
                w[0].1, w[1].1, w[0].0
            )));
        }
        Ok(points)
    }

    /// Accepts tied distances. Procedures then fail with an ambiguity error
    /// only when a tie decides their outcome.
    pub fn new_allowing_ties(coords: Vec<Vec<f64>>) -> Result<Self> {
        let dim = coords.first().map_or(0, Vec::len);
        if dim == 0 {
            return Err(Error::Configuration("points need dimension at least 1".into()));
        }
        if let Some((i, c)) = coords.iter().enumerate().find(|(_, c)| c.len() != dim) {
            return Err(Error::Configuration(format!("point {i} has dimension {}, expected {dim}", c.len())));
        }
        if coords.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Configuration("coordinates must be finite".into()));
        }
        Ok(MetricPoints { dim, coords })
    }

    /// Points on a line.
    pub fn on_line(xs: &[f64]) -> Result<Self> {
        Self::new(xs.iter().map(|&x| vec![x]).collect())
    }

    /// Reads `{"dim": m, "points": {"0": [..], "1": [..], ...}}`. Ids must
    /// be exactly `0..n`.
    pub fn from_json<R: Read>(reader: R) -> Result<Self> {
        let file: PointsFile = serde_json::from_reader(reader)?;
        let mut by_id = BTreeMap::new();
        for (key, c) in file.points {
            let id: usize = key
                .parse()
                .map_err(|_| Error::Configuration(format!("point id {key:?} is not a non-negative integer")))?;
            by_id.insert(id, c);
        }
        if by_id.keys().enumerate().any(|(i, &id)| i != id) {
            return Err(Error::Configuration("point ids must be 0..n without gaps".into()));
        }
        let coords: Vec<Vec<f64>> = by_id.into_values().collect();
        if coords.iter().any(|c| c.len() != file.dim) {
            return Err(Error::Configuration(format!("every point must have dimension {}", file.dim)));
        }
        Self::new(coords)
    }

    pub fn to_json<W: Write>(&self, writer: W) -> Result<()> {
        let points = self.coords.iter().enumerate().map(|(i, c)| (i.to_string(), c.clone())).collect();
        serde_json::to_writer(writer, &PointsFile { dim: self.dim, points })?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self, a: Alternative) -> Option<&[f64]> {
        self.coords.get(a.0).map(Vec::as_slice)
    }

    pub fn distance(&self, a: Alternative, b: Alternative) -> f64 {
        self.coords[a.0].iter().zip(&self.coords[b.0]).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    }

    pub fn distance_of(&self, p: PairId) -> f64 {
        self.distance(p.first(), p.second())
    }

    /// All `C(n, 2)` pairs in lexicographic order.
    pub fn all_pairs(&self) -> Vec<PairId> {
        all_pairs(self.len())
    }

    /// The same points with every coordinate negated.
    pub fn negated(&self) -> Self {
        MetricPoints { dim: self.dim, coords: self.coords.iter().map(|c| c.iter().map(|x| -x).collect()).collect() }
    }

    fn check_members(&self, s: &KSet) -> Result<()> {
        match s.iter().find(|a| a.0 >= self.len()) {
            Some(a) => Err(Error::InvalidQuery(format!("{a} has no coordinates"))),
            None => Ok(()),
        }
    }
}

/// An unordered pair of distinct alternatives, stored with the smaller id
/// first. Serializes as `[i, j]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "(Alternative, Alternative)")]
pub struct PairId(Alternative, Alternative);

impl PairId {
    pub fn new(a: Alternative, b: Alternative) -> Result<Self> {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Ok(PairId(a, b)),
            std::cmp::Ordering::Greater => Ok(PairId(b, a)),
            std::cmp::Ordering::Equal => Err(Error::InvalidQuery(format!("pair ({a}, {b}) repeats an element"))),
        }
    }

    pub fn first(self) -> Alternative {
        self.0
    }

    pub fn second(self) -> Alternative {
        self.1
    }

    pub fn contains(self, a: Alternative) -> bool {
        self.0 == a || self.1 == a
    }
}

impl TryFrom<(Alternative, Alternative)> for PairId {
    type Error = Error;

    fn try_from((a, b): (Alternative, Alternative)) -> Result<Self> {
        if a < b {
            Ok(PairId(a, b))
        } else {
            Err(Error::InvalidQuery(format!("pair [{a}, {b}] must be strictly increasing")))
        }
    }
}

impl std::fmt::Display for PairId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.0, self.1)
    }
}

pub fn all_pairs(n: usize) -> Vec<PairId> {
    (0..n).flat_map(|i| (i + 1..n).map(move |j| PairId(Alternative(i), Alternative(j)))).collect()
}

/// Whether the farthest-pair rule is known to return the sum-of-distances
/// minimizer for this dimension and set size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MedianGuarantee {
    Exact,
    Heuristic,
}

pub fn median_guarantee(dim: usize, k: usize) -> MedianGuarantee {
    if dim == 1 || k == 3 {
        MedianGuarantee::Exact
    } else {
        MedianGuarantee::Heuristic
    }
}

fn check_odd_arity(s: &KSet) -> Result<()> {
    if s.len() < 3 || s.len().is_multiple_of(2) {
        return Err(Error::InvalidArity(format!("need an odd set size of at least 3, got {}", s.len())));
    }
    Ok(())
}

/// Repeatedly removes the two members farthest apart; returns the survivor.
pub fn median_choice(points: &MetricPoints, s: &KSet) -> Result<Alternative> {
    check_odd_arity(s)?;
    points.check_members(s)?;
    let mut left: Vec<Alternative> = s.members().to_vec();
    while left.len() > 1 {
        let mut best: Option<(f64, usize, usize)> = None;
        let mut tied = false;
        for i in 0..left.len() {
            for j in i + 1..left.len() {
                let d = points.distance(left[i], left[j]);
                match best {
                    Some((b, _, _)) if (d - b).abs() < TIE_TOLERANCE => tied = true,
                    Some((b, _, _)) if d < b => {}
                    _ => {
                        best = Some((d, i, j));
                        tied = false;
                    }
                }
            }
        }
        if tied {
            return Err(Error::Ambiguity(format!("two farthest pairs tie among {left:?}")));
        }
        let (_, i, j) = best.expect("at least one pair");
        left.remove(j);
        left.remove(i);
    }
    Ok(left[0])
}

/// The member farthest from the median choice.
pub fn outlier_choice(points: &MetricPoints, s: &KSet) -> Result<Alternative> {
    let median = median_choice(points, s)?;
    let mut ranked: Vec<(f64, Alternative)> =
        s.iter().filter(|&a| a != median).map(|a| (points.distance(a, median), a)).collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0));
    if ranked.len() > 1 && ranked[0].0 - ranked[1].0 < TIE_TOLERANCE {
        return Err(Error::Ambiguity(format!("{} and {} tie for farthest from {median}", ranked[0].1, ranked[1].1)));
    }
    Ok(ranked[0].1)
}

fn check_triplet(s: &KSet, chosen: Alternative) -> Result<()> {
    if s.len() != 3 {
        return Err(Error::InvalidArity(format!("correspondence needs a triplet, got {} members", s.len())));
    }
    if !s.contains(chosen) {
        return Err(Error::InvalidQuery(format!("{chosen} is not in {s:?}")));
    }
    Ok(())
}

/// On a triplet, choosing an element is choosing the distance between the
/// other two.
pub fn triplet_distance_correspondence(s: &KSet, chosen: Alternative) -> Result<PairId> {
    check_triplet(s, chosen)?;
    let rest: Vec<Alternative> = s.iter().filter(|&a| a != chosen).collect();
    PairId::new(rest[0], rest[1])
}

/// Inverse of [`triplet_distance_correspondence`].
pub fn pair_to_triplet_choice(s: &KSet, pair: PairId) -> Result<Alternative> {
    if s.len() != 3 || !s.contains(pair.first()) || !s.contains(pair.second()) {
        return Err(Error::InvalidQuery(format!("{pair} is not a pair of {s:?}")));
    }
    Ok(s.iter().find(|&a| !pair.contains(a)).expect("three members"))
}

/// Answers which of two pairs is farther apart, and counts the calls.
pub trait PairOracle {
    fn universe_size(&self) -> usize;

    fn farther(&mut self, a: PairId, b: PairId) -> Result<PairId>;

    fn query_count(&self) -> u64;
}

/// Pair oracle backed by known coordinates.
#[derive(Debug, Clone)]
pub struct MetricPairOracle<'a> {
    points: &'a MetricPoints,
    queries: u64,
}

impl<'a> MetricPairOracle<'a> {
    pub fn new(points: &'a MetricPoints) -> Self {
        MetricPairOracle { points, queries: 0 }
    }
}

impl PairOracle for MetricPairOracle<'_> {
    fn universe_size(&self) -> usize {
        self.points.len()
    }

    fn farther(&mut self, a: PairId, b: PairId) -> Result<PairId> {
        let n = self.points.len();
        if a.second().0 >= n || b.second().0 >= n {
            return Err(Error::InvalidQuery(format!("pair outside the universe of {n}")));
        }
        self.queries += 1;
        let (da, db) = (self.points.distance_of(a), self.points.distance_of(b));
        if (da - db).abs() < TIE_TOLERANCE && a != b {
            return Err(Error::Ambiguity(format!("{a} and {b} are equally far")));
        }
        Ok(if da > db { a } else { b })
    }

    fn query_count(&self) -> u64 {
        self.queries
    }
}

/// Sorts all `C(n, 2)` pairs by increasing distance with a merge sort over
/// pair comparisons. Returns the order and the number of oracle calls.
pub fn crowd_median_sort<O: PairOracle>(oracle: &mut O, n: usize) -> Result<(Vec<PairId>, u64)> {
    let before = oracle.query_count();
    let (sorted, _) = merge_sort_by(all_pairs(n), |&a, &b| Ok::<_, Error>(oracle.farther(a, b)? == b))?;
    Ok((sorted, oracle.query_count() - before))
}

/// Which distance triplets a [`TripletDistanceOracle`] accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TripletMode {
    /// Any three distinct pairs.
    General,
    /// Only the three sides of a triangle `{u, v, x}`, which is all a
    /// choice among three alternatives can ask.
    Restricted,
}

/// Returns the longest of three presented distances.
#[derive(Debug, Clone)]
pub struct TripletDistanceOracle<'a> {
    points: &'a MetricPoints,
    mode: TripletMode,
    queries: u64,
}

impl<'a> TripletDistanceOracle<'a> {
    pub fn new(points: &'a MetricPoints, mode: TripletMode) -> Self {
        TripletDistanceOracle { points, mode, queries: 0 }
    }

    pub fn query(&mut self, pairs: [PairId; 3]) -> Result<PairId> {
        let [a, b, c] = pairs;
        if a == b || b == c || a == c {
            return Err(Error::InvalidQuery("the three pairs must differ".into()));
        }
        if self.mode == TripletMode::Restricted {
            let mut ends: Vec<Alternative> = pairs.iter().flat_map(|p| [p.first(), p.second()]).collect();
            ends.sort_unstable();
            ends.dedup();
            if ends.len() != 3 {
                return Err(Error::InvalidQuery(format!("{a}, {b}, {c} are not the sides of one triangle")));
            }
        }
        if pairs.iter().any(|p| p.second().0 >= self.points.len()) {
            return Err(Error::InvalidQuery("pair outside the universe".into()));
        }
        self.queries += 1;
        let mut by_len: Vec<(f64, PairId)> = pairs.iter().map(|&p| (self.points.distance_of(p), p)).collect();
        by_len.sort_by(|x, y| y.0.total_cmp(&x.0));
        if by_len[0].0 - by_len[1].0 < TIE_TOLERANCE {
            return Err(Error::Ambiguity(format!("{} and {} are equally far", by_len[0].1, by_len[1].1)));
        }
        Ok(by_len[0].1)
    }

    pub fn query_count(&self) -> u64 {
        self.queries
    }
}

/// Whether `2 C(n,3) < log2(C(n,2)!) - 1`, decided exactly as
/// `2^(2 C(n,3) + 1) < C(n,2)!`.
pub fn feasibility_check(n: usize) -> Result<bool> {
    if n < 3 {
        return Err(Error::Configuration(format!("feasibility needs n >= 3, got {n}")));
    }
    let triplet_bits = 2 * binomial(n as u64, 3);
    let pairs = binomial(n as u64, 2);
    let exponent = u32::try_from(triplet_bits + 1)
        .map_err(|_| Error::Configuration(format!("n = {n} is too large for exact comparison")))?;
    let lhs = BigUint::from(2u32).pow(exponent);
    let rhs = (1..=pairs as u64).fold(BigUint::from(1u32), |acc, i| acc * i);
    Ok(lhs < rhs)
}

/// Both sides of the feasibility inequality as floats, for reporting.
pub fn feasibility_sides(n: usize) -> (f64, f64) {
    let lhs = 2.0 * binomial(n as u64, 3) as f64;
    let rhs = crate::combinatorics::log2_factorial(binomial(n as u64, 2) as u64) - 1.0;
    (lhs, rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combinatorics::KSubsets;
    use crate::rng::seeded;
    use rand::Rng;

    fn set(ids: &[usize]) -> KSet {
        KSet::from_ids(ids.iter().copied()).unwrap()
    }

    /// Independent oracle: the member minimizing total distance to the rest.
    fn sum_minimizer(points: &MetricPoints, s: &KSet) -> Alternative {
        s.iter()
            .map(|a| (s.iter().map(|b| points.distance(a, b)).sum::<f64>(), a))
            .min_by(|x, y| x.0.total_cmp(&y.0))
            .unwrap()
            .1
    }

    #[test]
    fn line_of_five() {
        // Distances 1 repeat (1-2, 2-3), so general position is relaxed;
        // neither removal round depends on that tie.
        let p = MetricPoints::new_allowing_ties([1.0, 2.0, 3.0, 7.0, 20.0].iter().map(|&x| vec![x]).collect()).unwrap();
        let s = set(&[0, 1, 2, 3, 4]);
        assert_eq!(median_choice(&p, &s).unwrap(), Alternative(2));
        assert_eq!(sum_minimizer(&p, &s), Alternative(2));
        assert!(MetricPoints::on_line(&[1.0, 2.0, 3.0, 7.0, 20.0]).is_err());
    }

    #[test]
    fn line_of_three() {
        let p = MetricPoints::on_line(&[0.0, 1.0, 10.0]).unwrap();
        let s = set(&[0, 1, 2]);
        assert_eq!(median_choice(&p, &s).unwrap(), Alternative(1));
        assert_eq!(outlier_choice(&p, &s).unwrap(), Alternative(2));
    }

    #[test]
    fn planar_triplet_ties_are_rejected() {
        let tied = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, 5.0]];
        assert!(matches!(MetricPoints::new(tied.clone()), Err(Error::Ambiguity(_))));
        let relaxed = MetricPoints::new_allowing_ties(tied).unwrap();
        assert!(matches!(median_choice(&relaxed, &set(&[0, 1, 2])), Err(Error::Ambiguity(_))));
        let p = MetricPoints::new(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.4, 5.0]]).unwrap();
        let s = set(&[0, 1, 2]);
        assert_eq!(median_choice(&p, &s).unwrap(), sum_minimizer(&p, &s));
    }

    #[test]
    fn similarity_aversion() {
        // The four points are symmetric, so distances repeat across the two
        // triplets; within each triplet they are distinct.
        let p = MetricPoints::new_allowing_ties(vec![vec![0.0, 0.0], vec![10.0, 0.0], vec![10.0, 1.0], vec![0.0, 1.0]])
            .unwrap();
        let (a, b, b2, a2) = (0, 1, 2, 3);
        assert_eq!(outlier_choice(&p, &set(&[a, b, b2])).unwrap(), Alternative(a));
        assert_eq!(outlier_choice(&p, &set(&[a, b, a2])).unwrap(), Alternative(b));
    }

    #[test]
    fn even_arity_is_rejected() {
        let p = MetricPoints::on_line(&[0.0, 1.0, 3.0, 7.0]).unwrap();
        assert!(matches!(median_choice(&p, &set(&[0, 1, 2, 3])), Err(Error::InvalidArity(_))));
        assert!(matches!(median_choice(&p, &set(&[0, 9, 2])), Err(Error::InvalidQuery(_))));
    }

    #[test]
    fn median_matches_sum_minimizer_on_triplets() {
        let mut rng = seeded(31);
        for dim in 1..=5 {
            for _ in 0..2000 {
                let coords = (0..3).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect();
                let Ok(p) = MetricPoints::new(coords) else { continue };
                let s = set(&[0, 1, 2]);
                assert_eq!(median_choice(&p, &s).unwrap(), sum_minimizer(&p, &s));
            }
        }
    }

    #[test]
    fn median_on_a_line_is_the_middle_element() {
        let mut rng = seeded(32);
        for k in [3usize, 5, 7, 9] {
            for _ in 0..2500 {
                let xs: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
                let Ok(p) = MetricPoints::on_line(&xs) else { continue };
                let mut idx: Vec<usize> = (0..k).collect();
                idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
                let s = KSet::from_ids(0..k).unwrap();
                assert_eq!(median_choice(&p, &s).unwrap(), Alternative(idx[k / 2]));
                // Negating coordinates cannot change a distance-based choice.
                let q = p.negated();
                assert_eq!(median_choice(&q, &s).unwrap(), median_choice(&p, &s).unwrap());
                assert_eq!(outlier_choice(&q, &s).unwrap(), outlier_choice(&p, &s).unwrap());
            }
        }
    }

    #[test]
    fn outlier_is_opposite_the_shortest_side() {
        let mut rng = seeded(33);
        for _ in 0..5000 {
            let coords = (0..3).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
            let Ok(p) = MetricPoints::new(coords) else { continue };
            let s = set(&[0, 1, 2]);
            let shortest = all_pairs(3).into_iter().min_by(|a, b| p.distance_of(*a).total_cmp(&p.distance_of(*b))).unwrap();
            let longest = all_pairs(3).into_iter().max_by(|a, b| p.distance_of(*a).total_cmp(&p.distance_of(*b))).unwrap();
            let outlier = outlier_choice(&p, &s).unwrap();
            assert_eq!(triplet_distance_correspondence(&s, outlier).unwrap(), shortest);
            let median = median_choice(&p, &s).unwrap();
            assert_eq!(triplet_distance_correspondence(&s, median).unwrap(), longest);
        }
    }

    #[test]
    fn correspondence_round_trip() {
        let s = set(&[4, 7, 9]);
        assert_eq!(triplet_distance_correspondence(&s, Alternative(4)).unwrap(), PairId::new(Alternative(7), Alternative(9)).unwrap());
        assert_eq!(triplet_distance_correspondence(&s, Alternative(7)).unwrap(), PairId::new(Alternative(4), Alternative(9)).unwrap());
        for a in s.iter() {
            let pair = triplet_distance_correspondence(&s, a).unwrap();
            assert_eq!(pair_to_triplet_choice(&s, pair).unwrap(), a);
        }
        assert!(triplet_distance_correspondence(&s, Alternative(1)).is_err());
    }

    #[test]
    fn crowd_sort_on_a_line() {
        let p = MetricPoints::on_line(&[0.0, 1.0, 3.0, 7.0]).unwrap();
        let mut o = MetricPairOracle::new(&p);
        let (sorted, calls) = crowd_median_sort(&mut o, 4).unwrap();
        let expect: Vec<PairId> = [(0, 1), (1, 2), (0, 2), (2, 3), (1, 3), (0, 3)]
            .iter()
            .map(|&(i, j)| PairId::new(Alternative(i), Alternative(j)).unwrap())
            .collect();
        assert_eq!(sorted, expect);
        assert_eq!(calls, o.query_count());
        let p3 = MetricPoints::on_line(&[0.0, 1.0, 3.0]).unwrap();
        let (_, calls) = crowd_median_sort(&mut MetricPairOracle::new(&p3), 3).unwrap();
        assert!(calls <= 3);
    }

    #[test]
    fn crowd_sort_within_merge_bound() {
        let mut rng = seeded(34);
        let coords = (0..20).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
        let p = MetricPoints::new(coords).unwrap();
        let (sorted, calls) = crowd_median_sort(&mut MetricPairOracle::new(&p), 20).unwrap();
        let mut direct = p.all_pairs();
        direct.sort_by(|a, b| p.distance_of(*a).total_cmp(&p.distance_of(*b)));
        assert_eq!(sorted, direct);
        let big_n = 190.0f64;
        assert!((calls as f64) <= 2.0 * big_n * big_n.log2());
    }

    #[test]
    fn restricted_triplets_only_accept_triangles() {
        let p = MetricPoints::on_line(&[0.0, 1.0, 3.0, 7.0]).unwrap();
        let pr = |i, j| PairId::new(Alternative(i), Alternative(j)).unwrap();
        let mut general = TripletDistanceOracle::new(&p, TripletMode::General);
        assert_eq!(general.query([pr(0, 1), pr(2, 3), pr(1, 2)]).unwrap(), pr(2, 3));
        let mut restricted = TripletDistanceOracle::new(&p, TripletMode::Restricted);
        assert!(restricted.query([pr(0, 1), pr(2, 3), pr(1, 2)]).is_err());
        assert_eq!(restricted.query([pr(0, 1), pr(1, 3), pr(0, 3)]).unwrap(), pr(0, 3));
        assert_eq!(restricted.query_count(), 1);
        // The restricted answer is the median choice's pair on that triplet.
        let s = set(&[0, 1, 3]);
        let m = median_choice(&p, &s).unwrap();
        assert_eq!(triplet_distance_correspondence(&s, m).unwrap(), pr(0, 3));
    }

    #[test]
    fn feasibility_values() {
        assert!(!feasibility_check(3).unwrap());
        assert!(feasibility_check(4).unwrap());
        assert!(feasibility_check(5).unwrap());
        for n in 6..=10 {
            assert!(!feasibility_check(n).unwrap(), "n = {n}");
        }
        let (l, r) = feasibility_sides(5);
        assert_eq!(l, 20.0);
        assert!((r - 20.791_061).abs() < 1e-5);
        let (l, r) = feasibility_sides(6);
        assert_eq!(l, 40.0);
        assert!((r - 39.250_140).abs() < 1e-5);
        assert!(feasibility_check(2).is_err());
    }

    #[test]
    fn points_json_round_trip() {
        let json = r#"{"dim":2,"points":{"0":[0.0,0.0],"1":[10.0,0.0],"2":[10.0,1.0]}}"#;
        let p = MetricPoints::from_json(json.as_bytes()).unwrap();
        assert_eq!(p.len(), 3);
        let mut out = Vec::new();
        p.to_json(&mut out).unwrap();
        assert_eq!(MetricPoints::from_json(out.as_slice()).unwrap(), p);
        assert!(MetricPoints::from_json(r#"{"dim":1,"points":{"0":[0.0],"2":[1.0]}}"#.as_bytes()).is_err());
        assert!(MetricPoints::from_json(r#"{"dim":2,"points":{"0":[0.0]}}"#.as_bytes()).is_err());
    }

    #[test]
    fn pair_json_is_an_array() {
        let p = PairId::new(Alternative(3), Alternative(1)).unwrap();
        assert_eq!(serde_json::to_string(&p).unwrap(), "[1,3]");
        assert!(serde_json::from_str::<PairId>("[3,1]").is_err());
    }

    #[test]
    fn enumerated_triplets_agree_with_restricted_oracle() {
        let mut rng = seeded(35);
        let coords = (0..8).map(|_| vec![rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()]).collect();
        let p = MetricPoints::new(coords).unwrap();
        let mut o = TripletDistanceOracle::new(&p, TripletMode::Restricted);
        for s in KSubsets::new(8, 3) {
            let m = s.members();
            let sides = [PairId::new(m[0], m[1]).unwrap(), PairId::new(m[0], m[2]).unwrap(), PairId::new(m[1], m[2]).unwrap()];
            let longest = o.query(sides).unwrap();
            assert_eq!(pair_to_triplet_choice(&s, longest).unwrap(), median_choice(&p, &s).unwrap());
        }
    }
}

//! Query-answering simulators and the passive stream generator.
//!
//! These are the only types holding ground truth. Inference code sees them
//! through [`ChoiceOracle`], which exposes the answers and a query counter
//! and nothing else.

use std::io::{BufRead, Write};

use rand::distr::Distribution;
use rand::Rng;
use rand_distr::Binomial;
use serde::{Deserialize, Serialize};

use crate::choice::{select_position, Alternative, KSet, LatentOrder, PositionSelector};
use crate::combinatorics::{binomial, unrank, KSubsets};
use crate::error::{Error, Result};
use crate::rng::ChoiceRng;

/// Tolerance on `sum(probs) == 1` for mixture distributions.
pub const PROBABILITY_SUM_TOLERANCE: f64 = 1e-12;

/// Something that answers k-set queries and counts them.
pub trait ChoiceOracle {
    fn universe_size(&self) -> usize;

    fn k(&self) -> usize;

    /// Answers `s`. Invalid sets are rejected and not counted.
    fn query(&mut self, s: &KSet) -> Result<Alternative>;

    fn query_count(&self) -> u64;
}

fn validate_query(s: &KSet, k: usize, n: usize) -> Result<()> {
    if s.len() != k {
        return Err(Error::InvalidQuery(format!("expected a {k}-set, got {} members", s.len())));
    }
    if let Some(a) = s.iter().find(|a| a.0 >= n) {
        return Err(Error::InvalidQuery(format!("{a} is outside the universe of {n}")));
    }
    Ok(())
}

/// A single fixed position selector over a fixed order.
#[derive(Debug, Clone)]
pub struct DeterministicOracle {
    selector: PositionSelector,
    order: LatentOrder,
    queries: u64,
}

impl DeterministicOracle {
    pub fn new(selector: PositionSelector, order: LatentOrder) -> Result<Self> {
        if order.len() < selector.k() {
            return Err(Error::Configuration(format!(
                "universe of {} is smaller than k = {}",
                order.len(),
                selector.k()
            )));
        }
        Ok(DeterministicOracle { selector, order, queries: 0 })
    }

    pub fn selector(&self) -> PositionSelector {
        self.selector
    }

    pub fn order(&self) -> &LatentOrder {
        &self.order
    }
}

impl ChoiceOracle for DeterministicOracle {
    fn universe_size(&self) -> usize {
        self.order.len()
    }

    fn k(&self) -> usize {
        self.selector.k()
    }

    fn query(&mut self, s: &KSet) -> Result<Alternative> {
        validate_query(s, self.selector.k(), self.order.len())?;
        self.queries += 1;
        Ok(select_position(&self.order, s.members(), self.selector.ell()))
    }

    fn query_count(&self) -> u64 {
        self.queries
    }
}

/// A distribution over positions `1..=k` with pairwise gaps above `gamma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureDistribution {
    probs: Vec<f64>,
    gamma: f64,
}

impl MixtureDistribution {
    /// Validates positivity, the sum (normalizing if within tolerance) and
    /// `gamma`-separation.
    ///
    /// Separation is checked as `gap >= gamma - 1e-12` so that decimal
    /// inputs such as gaps of exactly 0.1 with `gamma = 0.1` survive
    /// floating-point rounding. Negated comparisons also reject NaN.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn new(probs: Vec<f64>, gamma: f64) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::Configuration("a mixture needs at least two positions".into()));
        }
        if !(gamma > 0.0) {
            return Err(Error::Configuration(format!("gamma = {gamma} must be positive")));
        }
        if let Some(p) = probs.iter().find(|p| !(**p > 0.0)) {
            return Err(Error::Configuration(format!("every position needs positive probability, found {p}")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROBABILITY_SUM_TOLERANCE {
            return Err(Error::Configuration(format!("probabilities sum to {sum}, not 1")));
        }
        let probs: Vec<f64> = probs.iter().map(|p| p / sum).collect();
        let sep = Self::separation(&probs);
        if sep < gamma - PROBABILITY_SUM_TOLERANCE {
            return Err(Error::Configuration(format!(
                "probabilities are only {sep:.6}-separated, below gamma = {gamma}; largest feasible gamma is {sep:.6}"
            )));
        }
        Ok(MixtureDistribution { probs, gamma })
    }

    /// Smallest pairwise gap, i.e. the largest feasible separation parameter.
    pub fn separation(probs: &[f64]) -> f64 {
        let mut sorted = probs.to_vec();
        sorted.sort_by(f64::total_cmp);
        sorted.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn k(&self) -> usize {
        self.probs.len()
    }

    pub fn reflected(&self) -> Self {
        let mut probs = self.probs.clone();
        probs.reverse();
        MixtureDistribution { probs, gamma: self.gamma }
    }

    /// Draws a 1-based position.
    pub fn sample_position<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i + 1;
            }
        }
        self.probs.len()
    }
}

/// Each query independently selects position `ell` with probability `pi_ell`.
#[derive(Debug, Clone)]
pub struct MixedOracle {
    order: LatentOrder,
    mixture: MixtureDistribution,
    rng: ChoiceRng,
    queries: u64,
}

impl MixedOracle {
    pub fn new(order: LatentOrder, mixture: MixtureDistribution, rng: ChoiceRng) -> Result<Self> {
        if order.len() < mixture.k() {
            return Err(Error::Configuration(format!(
                "universe of {} is smaller than k = {}",
                order.len(),
                mixture.k()
            )));
        }
        Ok(MixedOracle { order, mixture, rng, queries: 0 })
    }

    pub fn order(&self) -> &LatentOrder {
        &self.order
    }

    pub fn mixture(&self) -> &MixtureDistribution {
        &self.mixture
    }
}

impl ChoiceOracle for MixedOracle {
    fn universe_size(&self) -> usize {
        self.order.len()
    }

    fn k(&self) -> usize {
        self.mixture.k()
    }

    fn query(&mut self, s: &KSet) -> Result<Alternative> {
        validate_query(s, self.mixture.k(), self.order.len())?;
        self.queries += 1;
        let ell = self.mixture.sample_position(&mut self.rng);
        Ok(select_position(&self.order, s.members(), ell))
    }

    fn query_count(&self) -> u64 {
        self.queries
    }
}

/// Wraps an oracle and records every answered query in order.
#[derive(Debug, Clone)]
pub struct RecordingOracle<O> {
    inner: O,
    log: Vec<(KSet, Alternative)>,
}

impl<O: ChoiceOracle> RecordingOracle<O> {
    pub fn new(inner: O) -> Self {
        RecordingOracle { inner, log: Vec::new() }
    }

    pub fn log(&self) -> &[(KSet, Alternative)] {
        &self.log
    }

    pub fn into_inner(self) -> O {
        self.inner
    }
}

impl<O: ChoiceOracle> ChoiceOracle for RecordingOracle<O> {
    fn universe_size(&self) -> usize {
        self.inner.universe_size()
    }

    fn k(&self) -> usize {
        self.inner.k()
    }

    fn query(&mut self, s: &KSet) -> Result<Alternative> {
        let a = self.inner.query(s)?;
        self.log.push((s.clone(), a));
        Ok(a)
    }

    fn query_count(&self) -> u64 {
        self.inner.query_count()
    }
}

/// Observation window lengths for the two-phase passive stream, stored as
/// per-set inclusion probabilities `p = 1 - exp(-alpha * t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamConfig {
    pub p1: f64,
    pub p2: f64,
    /// Present when built from a Poisson rate and window lengths.
    pub rates: Option<PoissonWindows>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoissonWindows {
    pub alpha: f64,
    pub t1: f64,
    pub t2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    One,
    Two,
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(Error::Configuration(format!("{name} = {p} must lie in (0, 1]")))
    }
}

impl StreamConfig {
    pub fn from_rates(alpha: f64, t1: f64, t2: f64) -> Result<Self> {
        if !(alpha > 0.0 && t1 > 0.0 && t2 > 0.0) {
            return Err(Error::Configuration(format!(
                "alpha, t1, t2 must be positive (got {alpha}, {t1}, {t2})"
            )));
        }
        let p1 = -(-alpha * t1).exp_m1();
        let p2 = -(-alpha * t2).exp_m1();
        check_probability("p1", p1)?;
        check_probability("p2", p2)?;
        Ok(StreamConfig { p1, p2, rates: Some(PoissonWindows { alpha, t1, t2 }) })
    }

    pub fn from_probabilities(p1: f64, p2: f64) -> Result<Self> {
        check_probability("p1", p1)?;
        check_probability("p2", p2)?;
        Ok(StreamConfig { p1, p2, rates: None })
    }

    /// `p1 = b ln n / n` and `p2 = b ln n ln ln n / n`, capped at 1.
    pub fn from_b(n: usize, b: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::Configuration(format!("n = {n} too small for ln ln n > 0")));
        }
        let (p1, p2) = phase_probabilities(n, b);
        Self::from_probabilities(p1.min(1.0), p2.min(1.0))
    }

    pub fn probability(&self, phase: Phase) -> f64 {
        match phase {
            Phase::One => self.p1,
            Phase::Two => self.p2,
        }
    }
}

/// Uncapped `(b ln n / n, b ln n ln ln n / n)`.
pub fn phase_probabilities(n: usize, b: f64) -> (f64, f64) {
    let nf = n as f64;
    let ln = nf.ln();
    (b * ln / nf, b * ln * ln.ln() / nf)
}

/// One `(set, choice)` pair from the stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationRecord {
    pub set: KSet,
    pub choice: Alternative,
}

/// The distinct sets seen in one phase, with their answers.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ObservationBatch {
    pub records: Vec<ObservationRecord>,
}

impl ObservationBatch {
    pub fn new(records: Vec<ObservationRecord>) -> Result<Self> {
        if let Some(r) = records.iter().find(|r| !r.set.contains(r.choice)) {
            return Err(Error::InvalidQuery(format!("choice {} is not in its set {:?}", r.choice, r.set)));
        }
        Ok(ObservationBatch { records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// One `{"set":[..],"choice":id}` object per line.
    pub fn write_json_lines<W: Write>(&self, mut w: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_json_lines<R: BufRead>(r: R) -> Result<Self> {
        let mut records = Vec::new();
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str(&line)?);
        }
        Self::new(records)
    }
}

/// Above this many k-sets the generator stops enumerating and samples the
/// batch size from a binomial instead.
pub const ENUMERATION_LIMIT: u128 = 20_000_000;

/// Draws the sets observed during one phase: each of the `C(n, k)` sets is
/// present independently with the phase's probability, and present sets
/// carry the oracle's answer.
///
/// On the enumeration path each set consumes one uniform draw and is kept
/// iff the draw is below `p`, so for a fixed generator state the batch at
/// `p` is a subset of the batch at any `p' > p`.
pub fn sample_phase<O: ChoiceOracle>(
    config: &StreamConfig,
    phase: Phase,
    oracle: &mut O,
    rng: &mut ChoiceRng,
) -> Result<ObservationBatch> {
    let p = config.probability(phase);
    check_probability("phase probability", p)?;
    let (n, k) = (oracle.universe_size(), oracle.k());
    let total = binomial(n as u64, k as u64);
    let sets: Vec<KSet> = if total <= ENUMERATION_LIMIT {
        KSubsets::new(n, k).filter(|_| rng.random::<f64>() < p).collect()
    } else {
        let total_u64 = u64::try_from(total)
            .map_err(|_| Error::Configuration(format!("C({n}, {k}) is too large to sample")))?;
        let count = Binomial::new(total_u64, p)
            .map_err(|e| Error::Configuration(e.to_string()))?
            .sample(rng);
        let mut idx: Vec<usize> =
            rand::seq::index::sample(rng, total_u64 as usize, count as usize).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| unrank(i as u128, n, k)).collect()
    };
    let mut records = Vec::with_capacity(sets.len());
    for set in sets {
        let choice = oracle.query(&set)?;
        records.push(ObservationRecord { set, choice });
    }
    Ok(ObservationBatch { records })
}

//! Experiment orchestration: configuration, seeded parallel trials,
//! aggregation and CSV/JSON reports.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::active::{classify_type, query_lower_bound, recover_choice_function};
use crate::choice::{evaluate, KSet, LatentOrder, PositionSelector};
use crate::combinatorics::{binomial, unrank, KSubsets};
use crate::distance::{crowd_median_sort, feasibility_check, median_choice, median_guarantee, MedianGuarantee, MetricPairOracle, MetricPoints};
use crate::error::{Error, Result};
use crate::mixture::{estimate_mixture, recover_mixed};
use crate::oracle::{sample_phase, DeterministicOracle, MixedOracle, MixtureDistribution, Phase, StreamConfig};
use crate::passive::{coverage_report, recover_passive};
use crate::rng::{derive_seed, seeded, ChoiceRng};
use crate::stats::{clopper_pearson, mean};

/// Exact CSV header; the column order never changes.
pub const CSV_HEADER: [&str; 7] = ["trial", "seed", "queries", "success", "frac_correct", "frac_unresolved", "wall_ms"];

/// Above this many k-sets, active models are checked on a random sample.
const ACTIVE_EXHAUSTIVE_LIMIT: u128 = 200_000;
const ACTIVE_SAMPLE: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    RecoverActive,
    Classify,
    EstimateMixture,
    RecoverMixed,
    RecoverPassive,
    DistanceMedian,
    DistanceSort,
    Feasibility,
}

impl Mode {
    pub const ALL: [Mode; 8] = [
        Mode::RecoverActive,
        Mode::Classify,
        Mode::EstimateMixture,
        Mode::RecoverMixed,
        Mode::RecoverPassive,
        Mode::DistanceMedian,
        Mode::DistanceSort,
        Mode::Feasibility,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::RecoverActive => "recover-active",
            Mode::Classify => "classify",
            Mode::EstimateMixture => "estimate-mixture",
            Mode::RecoverMixed => "recover-mixed",
            Mode::RecoverPassive => "recover-passive",
            Mode::DistanceMedian => "distance-median",
            Mode::DistanceSort => "distance-sort",
            Mode::Feasibility => "feasibility",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Mode::ALL.iter().map(|m| m.name()).collect();
            Error::Configuration(format!("unknown mode {s:?}; expected one of {}", names.join(", ")))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(Error::Configuration(format!("unknown format {s:?}; expected csv or json"))),
        }
    }
}

/// Every setting optional, for layering a config file under command-line
/// flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    pub mode: Option<Mode>,
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub ell: Option<usize>,
    pub pi: Option<Vec<f64>>,
    pub gamma: Option<f64>,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub b: Option<f64>,
    pub alpha: Option<f64>,
    pub t1: Option<f64>,
    pub t2: Option<f64>,
    pub p1: Option<f64>,
    pub p2: Option<f64>,
    pub dim: Option<usize>,
    pub sample_size: Option<u64>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub format: Option<OutputFormat>,
    pub timing: Option<bool>,
}

impl ConfigLayer {
    /// Values in `top` win over values in `self`.
    pub fn overridden_by(self, top: ConfigLayer) -> ConfigLayer {
        ConfigLayer {
            mode: top.mode.or(self.mode),
            n: top.n.or(self.n),
            k: top.k.or(self.k),
            ell: top.ell.or(self.ell),
            pi: top.pi.or(self.pi),
            gamma: top.gamma.or(self.gamma),
            epsilon: top.epsilon.or(self.epsilon),
            delta: top.delta.or(self.delta),
            b: top.b.or(self.b),
            alpha: top.alpha.or(self.alpha),
            t1: top.t1.or(self.t1),
            t2: top.t2.or(self.t2),
            p1: top.p1.or(self.p1),
            p2: top.p2.or(self.p2),
            dim: top.dim.or(self.dim),
            sample_size: top.sample_size.or(self.sample_size),
            trials: top.trials.or(self.trials),
            seed: top.seed.or(self.seed),
            format: top.format.or(self.format),
            timing: top.timing.or(self.timing),
        }
    }
}

/// How a passive stream's phase probabilities are specified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StreamSpec {
    B(f64),
    Rates { alpha: f64, t1: f64, t2: f64 },
    Probabilities { p1: f64, p2: f64 },
}

/// A validated experiment. Mode-specific fields are filled with defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub n: usize,
    pub k: usize,
    pub ell: usize,
    pub pi: Vec<f64>,
    pub gamma: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub stream: Option<StreamSpec>,
    pub dim: usize,
    pub sample_size: u64,
    pub trials: u64,
    pub seed: u64,
    pub format: OutputFormat,
    /// When false, `wall_ms` is written as 0 so reruns are byte-identical.
    pub timing: bool,
}

fn need<T>(value: Option<T>, name: &str, mode: Mode) -> Result<T> {
    value.ok_or_else(|| Error::Configuration(format!("mode {mode} requires --{name}")))
}

fn usage(msg: String) -> Error {
    Error::Configuration(msg)
}

impl ExperimentConfig {
    /// Checks completeness and ranges for the chosen mode before any work.
    pub fn from_layer(layer: ConfigLayer) -> Result<Self> {
        let mode = layer.mode.ok_or_else(|| usage("no mode given".into()))?;
        let trials = layer.trials.unwrap_or(1);
        if trials == 0 {
            return Err(usage("trials must be at least 1".into()));
        }
        let mut cfg = ExperimentConfig {
            mode,
            n: 0,
            k: 0,
            ell: 0,
            pi: Vec::new(),
            gamma: 0.0,
            epsilon: layer.epsilon.unwrap_or(0.05),
            delta: 0.0,
            stream: None,
            dim: layer.dim.unwrap_or(2),
            sample_size: layer.sample_size.unwrap_or(100_000),
            trials,
            seed: layer.seed.unwrap_or(0),
            format: layer.format.unwrap_or_default(),
            timing: layer.timing.unwrap_or(true),
        };
        if !(cfg.epsilon > 0.0 && cfg.epsilon < 1.0) {
            return Err(usage(format!("epsilon = {} must lie in (0, 1)", cfg.epsilon)));
        }
        let selector = |k: usize, ell: usize| PositionSelector::new(k, ell).map(|_| ());
        match mode {
            Mode::RecoverActive => {
                cfg.n = need(layer.n, "n", mode)?;
                cfg.k = need(layer.k, "k", mode)?;
                cfg.ell = need(layer.ell, "ell", mode)?;
                selector(cfg.k, cfg.ell)?;
                if cfg.n < cfg.k + 1 || cfg.n + 1 < 2 * cfg.k {
                    return Err(usage(format!("recover-active needs n >= max(k + 1, 2k - 1), got n = {}", cfg.n)));
                }
            }
            Mode::Classify => {
                cfg.k = need(layer.k, "k", mode)?;
                cfg.ell = need(layer.ell, "ell", mode)?;
                selector(cfg.k, cfg.ell)?;
                cfg.n = layer.n.unwrap_or(cfg.k + 1);
                if cfg.n < cfg.k + 1 {
                    return Err(usage(format!("classify needs n >= k + 1, got n = {}", cfg.n)));
                }
            }
            Mode::EstimateMixture | Mode::RecoverMixed => {
                cfg.pi = need(layer.pi, "pi", mode)?;
                cfg.gamma = need(layer.gamma, "gamma", mode)?;
                MixtureDistribution::new(cfg.pi.clone(), cfg.gamma)?;
                cfg.k = cfg.pi.len();
                if mode == Mode::EstimateMixture {
                    cfg.n = layer.n.unwrap_or(cfg.k + 1);
                    cfg.delta = layer.delta.unwrap_or(cfg.gamma / 4.0);
                    if !(cfg.delta > 0.0 && cfg.delta < cfg.gamma / 2.0) {
                        return Err(usage(format!("delta = {} must lie in (0, gamma/2)", cfg.delta)));
                    }
                    if cfg.n < cfg.k + 1 {
                        return Err(usage(format!("estimate-mixture needs n >= k + 1, got n = {}", cfg.n)));
                    }
                } else {
                    cfg.n = need(layer.n, "n", mode)?;
                    cfg.epsilon = layer.epsilon.unwrap_or(0.1);
                    cfg.delta = cfg.gamma / 4.0;
                    if cfg.n < 2 * cfg.k {
                        return Err(usage(format!("recover-mixed needs n >= 2k, got n = {}", cfg.n)));
                    }
                }
            }
            Mode::RecoverPassive => {
                cfg.n = need(layer.n, "n", mode)?;
                cfg.k = need(layer.k, "k", mode)?;
                cfg.ell = need(layer.ell, "ell", mode)?;
                selector(cfg.k, cfg.ell)?;
                if cfg.ell < 2 || cfg.ell + 1 > cfg.k {
                    return Err(usage("recover-passive needs 2 <= ell <= k - 1".into()));
                }
                if cfg.n < cfg.k + 1 {
                    return Err(usage(format!("recover-passive needs n >= k + 1, got n = {}", cfg.n)));
                }
                let spec = match (layer.p1, layer.p2, layer.alpha, layer.t1, layer.t2) {
                    (Some(p1), Some(p2), None, None, None) => StreamSpec::Probabilities { p1, p2 },
                    (None, None, Some(alpha), Some(t1), Some(t2)) => StreamSpec::Rates { alpha, t1, t2 },
                    (None, None, None, None, None) => StreamSpec::B(layer.b.unwrap_or(8.0)),
                    _ => return Err(usage("give either --p1 and --p2, or --alpha, --t1 and --t2, or --b".into())),
                };
                stream_config(spec, cfg.n)?;
                cfg.stream = Some(spec);
            }
            Mode::DistanceMedian => {
                cfg.k = layer.k.unwrap_or(3);
                cfg.n = layer.n.unwrap_or(cfg.k);
                if cfg.k < 3 || cfg.k.is_multiple_of(2) || cfg.n < cfg.k {
                    return Err(usage(format!("distance-median needs odd k >= 3 and n >= k (k = {}, n = {})", cfg.k, cfg.n)));
                }
            }
            Mode::DistanceSort => {
                cfg.n = need(layer.n, "n", mode)?;
                if cfg.n < 2 {
                    return Err(usage("distance-sort needs n >= 2".into()));
                }
            }
            Mode::Feasibility => {
                cfg.n = need(layer.n, "n", mode)?;
                if cfg.n < 3 {
                    return Err(usage("feasibility needs n >= 3".into()));
                }
                cfg.trials = 1;
            }
        }
        if cfg.dim == 0 {
            return Err(usage("dim must be at least 1".into()));
        }
        Ok(cfg)
    }
}

fn stream_config(spec: StreamSpec, n: usize) -> Result<StreamConfig> {
    match spec {
        StreamSpec::B(b) => StreamConfig::from_b(n, b),
        StreamSpec::Rates { alpha, t1, t2 } => StreamConfig::from_rates(alpha, t1, t2),
        StreamSpec::Probabilities { p1, p2 } => StreamConfig::from_probabilities(p1, p2),
    }
}

/// One trial's outcome. `value` and `detail` are mode-specific and only
/// appear in JSON output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: u64,
    pub seed: u64,
    pub queries: u64,
    pub success: bool,
    pub frac_correct: Option<f64>,
    pub frac_unresolved: Option<f64>,
    pub wall_ms: u64,
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub detail: BTreeMap<String, f64>,
}

/// Summary statistics, recomputable from the rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub trials: u64,
    pub successes: u64,
    pub success_rate: f64,
    /// 95% Clopper–Pearson interval on the success rate.
    pub success_ci_lower: f64,
    pub success_ci_upper: f64,
    pub mean_queries: f64,
    pub mean_frac_correct: Option<f64>,
    pub mean_frac_unresolved: Option<f64>,
    pub mean_value: Option<f64>,
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Option<Vec<f64>> = values.collect();
    v.filter(|v| !v.is_empty()).map(|v| mean(&v))
}

impl Aggregate {
    pub fn from_rows(rows: &[TrialRow]) -> Self {
        let trials = rows.len() as u64;
        let successes = rows.iter().filter(|r| r.success).count() as u64;
        let ci = clopper_pearson(successes, trials, 0.95);
        let queries: Vec<f64> = rows.iter().map(|r| r.queries as f64).collect();
        Aggregate {
            trials,
            successes,
            success_rate: if trials == 0 { 0.0 } else { successes as f64 / trials as f64 },
            success_ci_lower: ci.lower,
            success_ci_upper: ci.upper,
            mean_queries: if trials == 0 { 0.0 } else { mean(&queries) },
            mean_frac_correct: mean_of(rows.iter().map(|r| r.frac_correct)),
            mean_frac_unresolved: mean_of(rows.iter().map(|r| r.frac_unresolved)),
            mean_value: mean_of(rows.iter().map(|r| r.value)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub rows: Vec<TrialRow>,
    pub aggregate: Aggregate,
}

impl TrialReport {
    pub fn from_rows(rows: Vec<TrialRow>) -> Self {
        let aggregate = Aggregate::from_rows(&rows);
        TrialReport { rows, aggregate }
    }
}

/// Runs every trial, in parallel, with seeds split from the master seed.
/// Rows come back ordered by trial index.
pub fn run(config: &ExperimentConfig) -> Result<TrialReport> {
    let rows = (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            let seed = derive_seed(config.seed, trial);
            let start = Instant::now();
            let mut row = run_trial(config, seed)?;
            row.trial = trial;
            row.seed = seed;
            row.wall_ms = if config.timing { start.elapsed().as_millis() as u64 } else { 0 };
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrialReport::from_rows(rows))
}

fn row(queries: u64, success: bool) -> TrialRow {
    TrialRow {
        trial: 0,
        seed: 0,
        queries,
        success,
        frac_correct: None,
        frac_unresolved: None,
        wall_ms: 0,
        value: None,
        detail: BTreeMap::new(),
    }
}

/// Algorithmic failures become unsuccessful rows; configuration problems
/// are errors.
fn failed_row(e: Error) -> Result<TrialRow> {
    match e {
        Error::Configuration(_) | Error::InvalidArity(_) | Error::Io(_) => Err(e),
        _ => {
            let mut r = row(0, false);
            r.detail.insert("error".into(), 1.0);
            Ok(r)
        }
    }
}

/// One trial of `config.mode` from a single trial seed.
pub fn run_trial(config: &ExperimentConfig, seed: u64) -> Result<TrialRow> {
    let attempt = match config.mode {
        Mode::RecoverActive => active_trial(config, seed),
        Mode::Classify => classify_trial(config, seed),
        Mode::EstimateMixture => estimate_trial(config, seed),
        Mode::RecoverMixed => mixed_trial(config, seed),
        Mode::RecoverPassive => passive_trial(config, seed),
        Mode::DistanceMedian => median_trial(config, seed),
        Mode::DistanceSort => sort_trial(config, seed),
        Mode::Feasibility => {
            let feasible = feasibility_check(config.n)?;
            let mut r = row(0, feasible);
            r.value = Some(if feasible { 1.0 } else { 0.0 });
            Ok(r)
        }
    };
    attempt.or_else(failed_row)
}

fn random_order(n: usize, seed: u64) -> LatentOrder {
    LatentOrder::random(n, &mut seeded(derive_seed(seed, 0)))
}

fn active_trial(cfg: &ExperimentConfig, seed: u64) -> Result<TrialRow> {
    let selector = PositionSelector::new(cfg.k, cfg.ell)?;
    let order = random_order(cfg.n, seed);
    let mut oracle = DeterministicOracle::new(selector, order.clone())?;
    let recovery = recover_choice_function(&mut oracle)?;
    let total = binomial(cfg.n as u64, cfg.k as u64);
    let (mut checked, mut correct) = (0u64, 0u64);
    let mut check = |s: &KSet| -> Result<()> {
        checked += 1;
        if recovery.model.predict(s)? == evaluate(selector, &order, s)? {
            correct += 1;
        }
        Ok(())
    };
    if total <= ACTIVE_EXHAUSTIVE_LIMIT {
        KSubsets::new(cfg.n, cfg.k).try_for_each(|s| check(&s))?;
    } else {
        let mut rng = seeded(derive_seed(seed, 1));
        for _ in 0..ACTIVE_SAMPLE {
            check(&unrank(rng.random_range(0..total), cfg.n, cfg.k))?;
        }
    }
    let stats = &recovery.stats;
    let mut r = row(stats.total(), correct == checked);
    r.frac_correct = Some(correct as f64 / checked as f64);
    r.frac_unresolved = Some(0.0);
    r.value = Some(recovery.model.ell_hat() as f64);
    r.detail.insert("discard_queries".into(), stats.discard as f64);
    r.detail.insert("sort_queries".into(), stats.sort as f64);
    r.detail.insert("lower_bound".into(), query_lower_bound(cfg.n, cfg.k));
    Ok(r)
}

fn classify_trial(cfg: &ExperimentConfig, seed: u64) -> Result<TrialRow> {
    let selector = PositionSelector::new(cfg.k, cfg.ell)?;
    let mut oracle = DeterministicOracle::new(selector, random_order(cfg.n, seed))?;
    let mut rng = seeded(derive_seed(seed, 1));
    let witness = KSet::from_ids(sample(&mut rng, cfg.n, cfg.k + 1))?;
    let c = classify_type(&mut oracle, &witness)?;
    let mut r = row(c.queries, c.canonical_position == selector.canonical_position());
    r.value = Some(c.canonical_position as f64);
    Ok(r)
}

fn mixed_oracle(cfg: &ExperimentConfig, seed: u64) -> Result<MixedOracle> {
    let mixture = MixtureDistribution::new(cfg.pi.clone(), cfg.gamma)?;
    MixedOracle::new(random_order(cfg.n, seed), mixture, seeded(derive_seed(seed, 1)))
}

fn estimate_trial(cfg: &ExperimentConfig, seed: u64) -> Result<TrialRow> {
    let mut oracle = mixed_oracle(cfg, seed)?;
    let e = estimate_mixture(&mut oracle, cfg.gamma, cfg.delta, cfg.epsilon)?;
    let err = e.max_error(&cfg.pi);
    let mut r = row(e.queries, err <= cfg.delta);
    r.value = Some(err);
    Ok(r)
}

fn mixed_trial(cfg: &ExperimentConfig, seed: u64) -> Result<TrialRow> {
    let mut oracle = mixed_oracle(cfg, seed)?;
    let truth = oracle.order().clone();
    let m = recover_mixed(&mut oracle, cfg.gamma, cfg.epsilon)?;
    let mut r = row(m.stages.total(), m.matches_up_to_reflection(&truth));
    r.value = Some(m.estimate.max_error(&cfg.pi));
    r.detail.insert("estimate_queries".into(), m.stages.estimate as f64);
    r.detail.insert("discard_queries".into(), m.stages.discard as f64);
    r.detail.insert("sort_queries".into(), (m.stages.sort_eligible + m.stages.sort_scrap) as f64);
    Ok(r)
}

/// Passive trial. Order, each phase and the scoring sample draw from
/// separate child seeds, so re-drawing one phase leaves the others fixed.
fn passive_trial(cfg: &ExperimentConfig, seed: u64) -> Result<TrialRow> {
    let selector = PositionSelector::new(cfg.k, cfg.ell)?;
    let order = random_order(cfg.n, seed);
    let stream = stream_config(cfg.stream.expect("validated"), cfg.n)?;
    let mut oracle = DeterministicOracle::new(selector, order.clone())?;
    let batch1 = sample_phase(&stream, Phase::One, &mut oracle, &mut seeded(derive_seed(seed, 2)))?;
    let batch2 = sample_phase(&stream, Phase::Two, &mut oracle, &mut seeded(derive_seed(seed, 3)))?;
    let observed = (batch1.len() + batch2.len()) as u64;
    let total = binomial(cfg.n as u64, cfg.k as u64) as f64;

    let mut r = row(observed, false);
    r.detail.insert("p1".into(), stream.p1);
    r.detail.insert("p2".into(), stream.p2);
    r.value = Some(observed as f64 / (2.0 * total));
    match recover_passive(&batch1, &batch2, cfg.n, cfg.k, cfg.ell) {
        Ok(model) => {
            let mut rng: ChoiceRng = seeded(derive_seed(seed, 4));
            let report = coverage_report(&model, selector, &order, cfg.sample_size, &mut rng)?;
            r.success = report.frac_correct >= 1.0 - cfg.epsilon;
            r.frac_correct = Some(report.frac_correct);
            r.frac_unresolved = Some(report.frac_unresolved);
            r.detail.insert("wrong".into(), report.wrong as f64);
            r.detail.insert("unresolved_pairs".into(), model.order.unresolved_fraction());
            r.detail.insert("exact_ineligible".into(), 1.0);
        }
        Err(Error::InsufficientCoverage { .. }) => {
            r.frac_correct = Some(0.0);
            r.frac_unresolved = Some(1.0);
            r.detail.insert("exact_ineligible".into(), 0.0);
        }
        Err(e) => return Err(e),
    }
    Ok(r)
}

/// Uniform points in the unit cube, redrawn until in general position.
fn random_points(n: usize, dim: usize, rng: &mut ChoiceRng) -> MetricPoints {
    loop {
        let coords = (0..n).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect();
        if let Ok(p) = MetricPoints::new(coords) {
            return p;
        }
    }
}

fn median_trial(cfg: &ExperimentConfig, seed: u64) -> Result<TrialRow> {
    let mut rng = seeded(derive_seed(seed, 0));
    let points = random_points(cfg.n, cfg.dim, &mut rng);
    let s = KSet::from_ids(sample(&mut rng, cfg.n, cfg.k))?;
    let chosen = median_choice(&points, &s)?;
    let minimizer = s
        .iter()
        .map(|a| (s.iter().map(|b| points.distance(a, b)).sum::<f64>(), a))
        .min_by(|x, y| x.0.total_cmp(&y.0))
        .expect("non-empty")
        .1;
    let mut r = row(((cfg.k - 1) / 2) as u64, chosen == minimizer);
    let exact = median_guarantee(cfg.dim, cfg.k) == MedianGuarantee::Exact;
    r.value = Some(if exact { 1.0 } else { 0.0 });
    Ok(r)
}

fn sort_trial(cfg: &ExperimentConfig, seed: u64) -> Result<TrialRow> {
    let mut rng = seeded(derive_seed(seed, 0));
    let points = random_points(cfg.n, cfg.dim, &mut rng);
    let mut oracle = MetricPairOracle::new(&points);
    let (sorted, calls) = crowd_median_sort(&mut oracle, cfg.n)?;
    let mut direct = points.all_pairs();
    direct.sort_by(|a, b| points.distance_of(*a).total_cmp(&points.distance_of(*b)));
    let big_n = direct.len() as f64;
    let mut r = row(calls, sorted == direct);
    r.value = Some(if big_n > 1.0 { calls as f64 / (2.0 * big_n * big_n.log2()) } else { 0.0 });
    Ok(r)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes the report. CSV holds one row per trial under [`CSV_HEADER`];
/// JSON holds `{"rows": [...], "aggregate": {...}}`.
pub fn emit<W: Write>(report: &TrialReport, format: OutputFormat, writer: W) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(writer);
            w.write_record(CSV_HEADER)?;
            for r in &report.rows {
                w.write_record([
                    r.trial.to_string(),
                    r.seed.to_string(),
                    r.queries.to_string(),
                    r.success.to_string(),
                    fmt_opt(r.frac_correct),
                    fmt_opt(r.frac_unresolved),
                    r.wall_ms.to_string(),
                ])?;
            }
            w.flush()?;
        }
        OutputFormat::Json => {
            let mut writer = writer;
            serde_json::to_writer_pretty(&mut writer, report)?;
            writeln!(writer)?;
        }
    }
    Ok(())
}

/// One point of a query-count scaling curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub n: usize,
    pub mean_queries: f64,
    /// Mean queries over `n log2 n` (active) or `n log2(n)^2` (mixed).
    pub normalized: f64,
    /// Information-theoretic floor over mean queries.
    pub lower_bound_ratio: f64,
}

/// Mean query counts for each `n`, with all other settings from `base`.
pub fn query_curve(base: &ExperimentConfig, n_values: &[usize]) -> Result<Vec<CurvePoint>> {
    if !matches!(base.mode, Mode::RecoverActive | Mode::RecoverMixed) {
        return Err(Error::Configuration(format!("query curves need recover-active or recover-mixed, not {}", base.mode)));
    }
    n_values
        .iter()
        .map(|&n| {
            let mut cfg = base.clone();
            cfg.n = n;
            let report = run(&cfg)?;
            let mean_queries = report.aggregate.mean_queries;
            let log = (n as f64).log2();
            let scale = if base.mode == Mode::RecoverActive { n as f64 * log } else { n as f64 * log * log };
            Ok(CurvePoint {
                n,
                mean_queries,
                normalized: mean_queries / scale,
                lower_bound_ratio: query_lower_bound(n, cfg.k) / mean_queries,
            })
        })
        .collect()
}

pub fn emit_curve<W: Write>(curve: &[CurvePoint], format: OutputFormat, writer: W) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(writer);
            w.write_record(["n", "mean_queries", "normalized", "lower_bound_ratio"])?;
            for p in curve {
                w.write_record([
                    p.n.to_string(),
                    p.mean_queries.to_string(),
                    p.normalized.to_string(),
                    p.lower_bound_ratio.to_string(),
                ])?;
            }
            w.flush()?;
        }
        OutputFormat::Json => {
            let mut writer = writer;
            serde_json::to_writer_pretty(&mut writer, curve)?;
            writeln!(writer)?;
        }
    }
    Ok(())
}

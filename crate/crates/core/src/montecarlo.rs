//! Seeded Monte Carlo trials and the estimators that compare them with the
//! closed forms.
//!
//! Every trial owns a ChaCha stream derived from `(seed, trial_index)` alone,
//! so trials can run in any order or in parallel and still reproduce
//! bit-for-bit. The same streams are reused at every sweep point.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::analytic::{self, AnalyticParams};
use crate::channel::{compute_sir, db_to_linear, ChannelParams, PowerConfig, SirSample};
use crate::error::{Error, Result};
use crate::geometry::{
    pair_users, place_fixed_pair, sample_interferers, sample_ppp, D2DPair, NetworkRealization, Point, Window,
};
use crate::protocol::{
    run_slot, ContentionModel, DiscoverySession, InterfererModel, SignalingMode, SlotContext, SlotOutcome,
};

/// Upper bound on the derived slot cap.
pub const MAX_DEFAULT_SLOTS_CAP: u64 = 10_000;
/// Realizations drawn before a trial that cannot form its pairs is skipped.
pub const MAX_RESAMPLES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// Every pair has separation exactly R and its receiver at the window center.
    #[default]
    FixedPair,
    /// Pairs are formed from a sampled UE population by nearest-neighbour matching.
    NearestNeighbor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    LambdaU,
    NPairs,
    TauDb,
    R,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::LambdaU => "lambda_u",
            SweepAxis::NPairs => "N",
            SweepAxis::TauDb => "tau_db",
            SweepAxis::R => "R",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "lambda_u" => Some(SweepAxis::LambdaU),
            "N" | "n_pairs" => Some(SweepAxis::NPairs),
            "tau_db" => Some(SweepAxis::TauDb),
            "R" | "r" => Some(SweepAxis::R),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub analytic: AnalyticParams,
    pub channel: ChannelParams,
    pub power: PowerConfig,
    /// BS density; base stations are only placed when control links are checked.
    pub lambda_b: f64,
    pub trials: usize,
    /// `None` derives the cap from the analytic slot requirement.
    pub slots_cap: Option<u64>,
    pub signaling: SignalingMode,
    pub interferers: InterfererModel,
    pub contention: ContentionModel,
    pub placement: Placement,
    /// Pairing threshold for nearest-neighbour placement; defaults to R.
    pub pair_threshold: Option<f64>,
    /// Interferer window radius; defaults to [`Window::truncation_radius`].
    pub window_radius: Option<f64>,
    pub tau_grid_db: Vec<f64>,
    pub sweep: Option<Sweep>,
    pub seed: u64,
}

pub const DEFAULT_SEED: u64 = 20_170_502;

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            analytic: AnalyticParams::default(),
            channel: ChannelParams::default(),
            power: PowerConfig::default(),
            lambda_b: 0.2,
            trials: 100_000,
            slots_cap: None,
            signaling: SignalingMode::SingleMessage,
            interferers: InterfererModel::Saturated,
            contention: ContentionModel::Persistent,
            placement: Placement::FixedPair,
            pair_threshold: None,
            window_radius: None,
            tau_grid_db: vec![-10.0, -5.0, 0.0, 5.0, 10.0],
            sweep: None,
            seed: DEFAULT_SEED,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.analytic.validate()?;
        self.channel.validate()?;
        if (self.analytic.alpha - self.channel.alpha).abs() > 0.0 {
            return Err(Error::param("alpha", "analytic and channel exponents differ"));
        }
        if !(self.lambda_b.is_finite() && self.lambda_b >= 0.0) {
            return Err(Error::param("lambda_b", format!("must be >= 0, got {}", self.lambda_b)));
        }
        if self.trials < 1 {
            return Err(Error::param("trials", "must be >= 1"));
        }
        if self.slots_cap == Some(0) {
            return Err(Error::param("slots_cap", "must be >= 1"));
        }
        if let Some(t) = self.pair_threshold {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::param("pair_threshold", format!("must be > 0, got {t}")));
            }
        }
        if let Some(w) = self.window_radius {
            if !(w.is_finite() && w > self.analytic.r) {
                return Err(Error::param("window_radius", format!("must exceed R, got {w}")));
            }
        }
        if self.tau_grid_db.iter().any(|t| !t.is_finite()) {
            return Err(Error::param("tau_grid_db", "values must be finite"));
        }
        if let Some(sweep) = &self.sweep {
            for &v in &sweep.values {
                self.at_sweep_value(sweep.axis, v)?;
            }
        }
        Ok(())
    }

    /// Copy of this config with one parameter replaced by a sweep value.
    pub fn at_sweep_value(&self, axis: SweepAxis, value: f64) -> Result<ExperimentConfig> {
        let mut c = self.clone();
        c.sweep = None;
        match axis {
            SweepAxis::LambdaU => c.analytic.lambda_u = value,
            SweepAxis::TauDb => c.analytic.tau_db = value,
            SweepAxis::R => c.analytic.r = value,
            SweepAxis::NPairs => {
                if !(value >= 1.0 && value.fract() == 0.0) {
                    return Err(Error::param(
                        "N",
                        format!("sweep value {value} is not a positive integer"),
                    ));
                }
                c.analytic.n_pairs = value as usize;
            }
        }
        c.analytic.validate()?;
        Ok(c)
    }

    pub fn window_radius(&self) -> f64 {
        self.window_radius
            .unwrap_or_else(|| Window::truncation_radius(self.analytic.r, self.analytic.lambda_u))
    }

    pub fn slots_cap(&self) -> u64 {
        self.slots_cap
            .unwrap_or_else(|| match analytic::required_slots(&self.analytic) {
                Ok(n) => n.saturating_mul(10).clamp(1, MAX_DEFAULT_SLOTS_CAP),
                Err(_) => MAX_DEFAULT_SLOTS_CAP,
            })
    }

    fn slot_context(&self) -> SlotContext {
        SlotContext {
            channel: self.channel,
            tau_db: self.analytic.tau_db,
            signaling: self.signaling,
            interferers: self.interferers,
            contention: self.contention,
            interferer_density: self.analytic.lambda_u,
            window_radius: self.window_radius(),
        }
    }
}

pub fn trial_rng(seed: u64, trial_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial_index);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_index: u64,
    /// No realization with enough pairs was found.
    pub skipped: bool,
    /// SIR of pair 1 against the realization's interferer field.
    pub snapshot_sir: Option<SirSample>,
    pub opportunities: u64,
    pub successes: u64,
    /// Per pair, in id order; `None` means censored at the slot cap.
    pub slots_to_success: Vec<Option<u64>>,
    pub slots_run: u64,
}

impl TrialRecord {
    fn skipped(trial_index: u64) -> Self {
        TrialRecord {
            trial_index,
            skipped: true,
            snapshot_sir: None,
            opportunities: 0,
            successes: 0,
            slots_to_success: Vec::new(),
            slots_run: 0,
        }
    }
}

fn build_realization(config: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Result<Option<NetworkRealization>> {
    let a = &config.analytic;
    let window = Window::new(Point::ORIGIN, config.window_radius())?;
    let mut realization = match config.placement {
        Placement::FixedPair => {
            let mut real = place_fixed_pair(a.r, a.lambda_u, &window, config.channel.interferer_region, rng)?;
            let rx = real.pairs[0].rx;
            for id in 2..=a.n_pairs {
                let angle = rand::Rng::random_range(rng, 0.0..std::f64::consts::TAU);
                real.pairs.push(D2DPair {
                    id,
                    tx: Point::new(rx.x + a.r * angle.cos(), rx.y + a.r * angle.sin()),
                    rx,
                    separation: a.r,
                });
            }
            real
        }
        Placement::NearestNeighbor => {
            let threshold = config.pair_threshold.unwrap_or(a.r);
            let mut found = None;
            for _ in 0..MAX_RESAMPLES {
                let ues = sample_ppp(a.lambda_u, &window, rng)?;
                match pair_users(&ues, threshold, a.n_pairs) {
                    Ok(pairs) => {
                        found = Some(NetworkRealization {
                            bs_points: Vec::new(),
                            ue_points: ues,
                            pairs,
                            window,
                            seed: config.seed,
                        });
                        break;
                    }
                    Err(Error::PairShortfall { .. }) => continue,
                    Err(e) => return Err(e),
                }
            }
            match found {
                Some(r) => r,
                None => return Ok(None),
            }
        }
    };
    realization.seed = config.seed;
    if config.signaling == SignalingMode::FullSignaling && config.lambda_b > 0.0 {
        realization.bs_points = sample_ppp(config.lambda_b, &window, rng)?;
    }
    Ok(Some(realization))
}

fn run_trial_inner(
    config: &ExperimentConfig,
    trial_index: u64,
    mut trace: Option<&mut Vec<SlotOutcome>>,
) -> Result<TrialRecord> {
    let mut rng = trial_rng(config.seed, trial_index);
    let Some(realization) = build_realization(config, &mut rng)? else {
        return Ok(TrialRecord::skipped(trial_index));
    };

    let first = realization.pairs[0];
    let snapshot_field = match config.placement {
        Placement::FixedPair => realization.ue_points.clone(),
        Placement::NearestNeighbor => sample_interferers(
            config.analytic.lambda_u,
            &Window::new(first.rx, config.window_radius())?,
            config.channel.interferer_region,
            first.separation,
            &mut rng,
        )?,
    };
    let snapshot_sir = compute_sir(&first.tx, &first.rx, &snapshot_field, &config.channel, &mut rng)?;

    let ctx = config.slot_context();
    let cap = config.slots_cap();
    let mut sessions: Vec<DiscoverySession> = realization.pairs.iter().copied().map(DiscoverySession::new).collect();
    let mut tally = SuccessTally::default();
    let mut slots_run = 0;
    while slots_run < cap && !sessions.iter().all(DiscoverySession::is_established) {
        let outcome = run_slot(&realization, &mut sessions, slots_run, &ctx, &mut rng)?;
        tally.record(&outcome);
        if let Some(t) = trace.as_deref_mut() {
            t.push(outcome);
        }
        slots_run += 1;
    }

    Ok(TrialRecord {
        trial_index,
        skipped: false,
        snapshot_sir: Some(snapshot_sir),
        opportunities: tally.opportunities,
        successes: tally.successes,
        slots_to_success: sessions.iter().map(|s| s.slots_to_success).collect(),
        slots_run,
    })
}

pub fn run_trial(config: &ExperimentConfig, trial_index: u64) -> Result<TrialRecord> {
    run_trial_inner(config, trial_index, None)
}

/// Same as [`run_trial`], also returning every slot outcome.
pub fn run_trial_traced(config: &ExperimentConfig, trial_index: u64) -> Result<(TrialRecord, Vec<SlotOutcome>)> {
    let mut trace = Vec::new();
    let record = run_trial_inner(config, trial_index, Some(&mut trace))?;
    Ok((record, trace))
}

/// Runs `config.trials` trials in parallel; records come back in index order.
pub fn run_trials(config: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    (0..config.trials as u64)
        .into_par_iter()
        .map(|i| run_trial(config, i))
        .collect()
}

/// Empirical `P(SIR >= tau)` on a grid of thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCcdf {
    pub tau_db: Vec<f64>,
    pub fraction: Vec<f64>,
    pub samples: usize,
}

pub fn estimate_sir_ccdf(samples: &[SirSample], tau_grid_db: &[f64]) -> Result<EmpiricalCcdf> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut sorted: Vec<f64> = samples.iter().map(SirSample::value).collect();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let fraction = tau_grid_db
        .iter()
        .map(|&t| {
            let below = sorted.partition_point(|&v| v < db_to_linear(t));
            (n - below) as f64 / n as f64
        })
        .collect();
    Ok(EmpiricalCcdf {
        tau_db: tau_grid_db.to_vec(),
        fraction,
        samples: n,
    })
}

/// Contention opportunities (pending pair, slot) and how many succeeded.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SuccessTally {
    pub opportunities: u64,
    pub successes: u64,
}

impl SuccessTally {
    pub fn record(&mut self, slot: &SlotOutcome) {
        self.opportunities += slot.pairs.len() as u64;
        self.successes += slot.pairs.iter().filter(|r| r.success).count() as u64;
    }

    pub fn rate(&self) -> Option<f64> {
        (self.opportunities > 0).then(|| self.successes as f64 / self.opportunities as f64)
    }
}

pub fn estimate_p_success(outcomes: &[SlotOutcome]) -> Result<f64> {
    let mut tally = SuccessTally::default();
    outcomes.iter().for_each(|o| tally.record(o));
    tally.rate().ok_or(Error::EmptySamples)
}

/// Step CDF over a sorted grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCdf {
    pub grid: Vec<f64>,
    pub cumulative: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn at(&self, x: f64) -> f64 {
        match self.grid.partition_point(|&g| g <= x) {
            0 => 0.0,
            k => self.cumulative[k - 1],
        }
    }

    /// Smallest grid value whose cumulative fraction reaches `q`.
    pub fn min_reaching(&self, q: f64) -> Option<f64> {
        self.grid
            .iter()
            .zip(&self.cumulative)
            .find(|(_, &c)| c >= q)
            .map(|(&g, _)| g)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotsSummary {
    /// CDF of slots-to-success over all sessions, censored ones included in
    /// the denominator; the grid runs 1..=largest observed value.
    pub cdf: EmpiricalCdf,
    pub histogram: BTreeMap<u64, u64>,
    /// Mean over uncensored sessions.
    pub mean: f64,
    pub total: usize,
    pub censored: usize,
}

impl SlotsSummary {
    pub fn censored_fraction(&self) -> f64 {
        self.censored as f64 / self.total as f64
    }
}

pub fn estimate_slots_cdf(records: &[TrialRecord]) -> Result<SlotsSummary> {
    let mut histogram = BTreeMap::new();
    let mut total = 0;
    let mut censored = 0;
    let mut sum = 0u128;
    for slots in records.iter().filter(|r| !r.skipped).flat_map(|r| &r.slots_to_success) {
        total += 1;
        match slots {
            Some(n) => {
                *histogram.entry(*n).or_insert(0u64) += 1;
                sum += *n as u128;
            }
            None => censored += 1,
        }
    }
    if total == 0 {
        return Err(Error::EmptySamples);
    }
    let uncensored = total - censored;
    if uncensored == 0 {
        let cap = records.iter().map(|r| r.slots_run).max().unwrap_or(0);
        return Err(Error::AllCensored { total, cap });
    }
    let max = *histogram.keys().next_back().expect("non-empty");
    let mut grid = Vec::with_capacity(max as usize);
    let mut cumulative = Vec::with_capacity(max as usize);
    let mut acc = 0u64;
    for n in 1..=max {
        acc += histogram.get(&n).copied().unwrap_or(0);
        grid.push(n as f64);
        cumulative.push(acc as f64 / total as f64);
    }
    Ok(SlotsSummary {
        cdf: EmpiricalCdf { grid, cumulative },
        histogram,
        mean: sum as f64 / uncensored as f64,
        total,
        censored,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoodnessOfFit {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson chi-square test of slot counts against Geometric(p) on `1, 2, ...`.
///
/// Bins are single values while their expected count is at least 5; the
/// remaining tail forms one final bin.
pub fn geometric_chi_square(samples: &[u64], p: f64) -> Result<GoodnessOfFit> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::param("p", format!("must lie in (0, 1), got {p}")));
    }
    let n = samples.len() as f64;
    let mut expected = Vec::new();
    let mut tail = 1.0;
    let mut k = 1u64;
    loop {
        let pk = p * (1.0 - p).powf((k - 1) as f64);
        if n * pk < 5.0 || n * (tail - pk) < 5.0 {
            break;
        }
        expected.push(n * pk);
        tail -= pk;
        k += 1;
    }
    expected.push(n * tail);
    let last = expected.len() as u64;
    let mut observed = vec![0.0; expected.len()];
    for &s in samples {
        let bin = s.clamp(1, last) - 1;
        observed[bin as usize] += 1.0;
    }
    let statistic: f64 = observed.iter().zip(&expected).map(|(o, e)| (o - e) * (o - e) / e).sum();
    let dof = expected.len().saturating_sub(1).max(1);
    let chi = ChiSquared::new(dof as f64).map_err(|e| Error::param("dof", e.to_string()))?;
    Ok(GoodnessOfFit {
        statistic,
        dof,
        p_value: 1.0 - chi.cdf(statistic),
    })
}

/// One sweep point: empirical statistics next to their closed forms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub sweep_value: Option<f64>,
    pub params: AnalyticParams,
    pub tau_grid_db: Vec<f64>,
    pub sir_ccdf_empirical: Option<EmpiricalCcdf>,
    pub sir_ccdf_analytic: Vec<f64>,
    pub p_success_empirical: Option<f64>,
    pub p_success_analytic: f64,
    pub n_opportunities: u64,
    pub slots: Option<SlotsSummary>,
    pub required_slots_analytic: Option<u64>,
    pub slots_cap: u64,
    pub trials: usize,
    pub skipped: usize,
}

impl MetricRecord {
    /// Closed-form `P(at least one success within n slots)`.
    pub fn slots_cdf_analytic(&self, n: u64) -> f64 {
        analytic::p_at_least_one(self.p_success_analytic, n)
    }

    /// Slot grid for tabulating slot CDFs: the observed range, extended to
    /// cover the analytic requirement.
    pub fn slot_grid(&self) -> Vec<u64> {
        let observed = self.slots.as_ref().map(|s| s.cdf.grid.len() as u64).unwrap_or(0);
        let required = self.required_slots_analytic.map(|n| 2 * n).unwrap_or(0);
        let hi = observed.max(required).min(self.slots_cap).max(1);
        (1..=hi).collect()
    }
}

fn analytic_record(config: &ExperimentConfig, sweep_value: Option<f64>) -> Result<MetricRecord> {
    let params = config.analytic;
    let sir_ccdf_analytic = config
        .tau_grid_db
        .iter()
        .map(|&tau_db| analytic::sir_ccdf(&AnalyticParams { tau_db, ..params }))
        .collect::<Result<Vec<_>>>()?;
    let required = match analytic::required_slots(&params) {
        Ok(n) => Some(n),
        Err(Error::Unreachable { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(MetricRecord {
        sweep_value,
        params,
        tau_grid_db: config.tau_grid_db.clone(),
        sir_ccdf_empirical: None,
        sir_ccdf_analytic,
        p_success_empirical: None,
        p_success_analytic: analytic::p_success(&params)?,
        n_opportunities: 0,
        slots: None,
        required_slots_analytic: required,
        slots_cap: config.slots_cap(),
        trials: 0,
        skipped: 0,
    })
}

/// Simulate one parameter point and pair it with the closed forms.
pub fn evaluate_point(config: &ExperimentConfig, sweep_value: Option<f64>) -> Result<MetricRecord> {
    let mut record = analytic_record(config, sweep_value)?;
    let trials = run_trials(config)?;
    let sirs: Vec<SirSample> = trials.iter().filter_map(|t| t.snapshot_sir).collect();
    let mut tally = SuccessTally::default();
    for t in &trials {
        tally.opportunities += t.opportunities;
        tally.successes += t.successes;
    }
    record.sir_ccdf_empirical = if sirs.is_empty() {
        None
    } else {
        Some(estimate_sir_ccdf(&sirs, &config.tau_grid_db)?)
    };
    record.p_success_empirical = tally.rate();
    record.n_opportunities = tally.opportunities;
    record.slots = match estimate_slots_cdf(&trials) {
        Ok(s) => Some(s),
        Err(Error::AllCensored { .. } | Error::EmptySamples) => None,
        Err(e) => return Err(e),
    };
    record.trials = trials.len();
    record.skipped = trials.iter().filter(|t| t.skipped).count();
    Ok(record)
}

fn sweep_points(config: &ExperimentConfig) -> Result<Vec<(Option<f64>, ExperimentConfig)>> {
    config.validate()?;
    match &config.sweep {
        None => Ok(vec![(None, config.clone())]),
        Some(sweep) => sweep
            .values
            .iter()
            .map(|&v| Ok((Some(v), config.at_sweep_value(sweep.axis, v)?)))
            .collect(),
    }
}

/// Monte Carlo plus closed forms at every sweep value.
pub fn sweep(config: &ExperimentConfig) -> Result<Vec<MetricRecord>> {
    sweep_points(config)?
        .iter()
        .map(|(v, c)| evaluate_point(c, *v))
        .collect()
}

/// Closed forms only.
pub fn analytic_sweep(config: &ExperimentConfig) -> Result<Vec<MetricRecord>> {
    sweep_points(config)?
        .iter()
        .map(|(v, c)| analytic_record(c, *v))
        .collect()
}

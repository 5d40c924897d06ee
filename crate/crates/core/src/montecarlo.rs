//! Simulation of total progenies with a random initial population, i.i.d.
//! replication means, the two estimators of the offspring mean, and
//! empirical decay rates of rare events.
//!
//! Randomness: every (arm, n, trial) cell owns a ChaCha8 generator keyed by
//! the master seed, the arm and `n`, with the trial index as the ChaCha
//! stream id. A trial draws its `n` replications sequentially from its own
//! stream, so outputs do not depend on how rayon schedules trials.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::offspring::{DistSpec, Pmf};
use crate::progeny::ProgenyModel;
use crate::ratefn::{rate_estimator_ratio, rate_progeny_compound};

pub const DEFAULT_POPULATION_CAP: u64 = 10_000_000;
/// Tables with at most this many entries are sampled by a linear cdf scan.
pub const INVERSE_CDF_MAX_SUPPORT: usize = 16;
/// Normal quantile of the two-sided 95% interval.
const Z95: f64 = 1.959_963_984_540_054;

const ARM_RANDOM_START: u64 = 0;
const ARM_DETERMINISTIC_START: u64 = 1;

/// Draws integers from a [`Pmf`] (renormalized over its represented mass).
#[derive(Debug, Clone)]
pub enum Sampler {
    Constant(u64),
    InverseCdf(Vec<f64>),
    Alias(WeightedAliasIndex<f64>),
}

impl Sampler {
    pub fn new(law: &Pmf) -> Result<Self> {
        if let Some(h) = law.degenerate_point() {
            return Ok(Sampler::Constant(h as u64));
        }
        let probs = law.probs();
        if probs.len() <= INVERSE_CDF_MAX_SUPPORT {
            let total: f64 = probs.iter().sum();
            let mut acc = 0.0;
            let cdf = probs
                .iter()
                .map(|p| {
                    acc += p / total;
                    acc
                })
                .collect();
            Ok(Sampler::InverseCdf(cdf))
        } else {
            WeightedAliasIndex::new(probs.to_vec())
                .map(Sampler::Alias)
                .map_err(|e| Error::InvalidPmf(format!("cannot build alias table: {e}")))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match self {
            Sampler::Constant(h) => *h,
            Sampler::InverseCdf(cdf) => {
                let u: f64 = rng.random();
                cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1) as u64
            }
            Sampler::Alias(table) => table.sample(rng) as u64,
        }
    }
}

/// Samples `(Y, Z)`: the total progeny of a lineage started from `Z ~ g`
/// ancestors, and `Z` itself.
#[derive(Debug, Clone)]
pub struct ProgenySampler {
    offspring: Sampler,
    initial: Sampler,
    population_cap: u64,
}

impl ProgenySampler {
    pub fn new(f: &Pmf, g: &Pmf, population_cap: u64) -> Result<Self> {
        if f.exact_mean() >= 1.0 {
            return Err(Error::Hypothesis(format!(
                "simulation needs a subcritical offspring law (mu_f = {} >= 1)",
                f.exact_mean()
            )));
        }
        if g.prob(0) > 0.0 {
            return Err(Error::Hypothesis("simulation needs q_0 = 0 so that Y >= Z >= 1".into()));
        }
        if population_cap < 1 {
            return Err(Error::Scenario("population_cap must be >= 1".into()));
        }
        Ok(Self { offspring: Sampler::new(f)?, initial: Sampler::new(g)?, population_cap })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(u64, u64)> {
        let z = self.initial.sample(rng);
        let mut generation = z;
        let mut total = z;
        while generation > 0 {
            let mut next = 0u64;
            for _ in 0..generation {
                next += self.offspring.sample(rng);
            }
            total += next;
            if total > self.population_cap {
                return Err(Error::CapExceeded { cap: self.population_cap });
            }
            generation = next;
        }
        Ok((total, z))
    }
}

/// Event whose probability is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdKind {
    /// `Ybar_n >= level`.
    MeanGe,
    /// `Ybar_n <= level`.
    MeanLe,
    /// `|(Ybar_n - Zbar_n) / Ybar_n - mu_f| >= level`.
    EstimatorDev,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Threshold {
    pub kind: ThresholdKind,
    pub level: f64,
}

impl Threshold {
    pub fn label(&self) -> String {
        let kind = match self.kind {
            ThresholdKind::MeanGe => "mean_ge",
            ThresholdKind::MeanLe => "mean_le",
            ThresholdKind::EstimatorDev => "estimator_dev",
        };
        format!("{kind}:{}", self.level)
    }

    fn hit(&self, n: u64, sum_y: u64, sum_z: u64, mu_f: f64) -> bool {
        let n = n as f64;
        match self.kind {
            ThresholdKind::MeanGe => sum_y as f64 >= self.level * n,
            ThresholdKind::MeanLe => sum_y as f64 <= self.level * n,
            ThresholdKind::EstimatorDev => (ratio_estimate(sum_y, sum_z) - mu_f).abs() >= self.level,
        }
    }
}

fn default_population_cap() -> u64 {
    DEFAULT_POPULATION_CAP
}

/// A simulation experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LdpScenario {
    pub f: DistSpec,
    pub g: DistSpec,
    pub n_schedule: Vec<u64>,
    pub trials: u64,
    #[serde(default)]
    pub thresholds: Vec<Threshold>,
    pub master_seed: u64,
    #[serde(default = "default_population_cap")]
    pub population_cap: u64,
}

impl LdpScenario {
    pub fn validate(&self) -> Result<()> {
        if self.n_schedule.is_empty() || self.n_schedule[0] < 1 {
            return Err(Error::Scenario("n_schedule must be nonempty with entries >= 1".into()));
        }
        if self.n_schedule.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Scenario("n_schedule must be strictly increasing".into()));
        }
        if self.trials < 1 {
            return Err(Error::Scenario("trials must be >= 1".into()));
        }
        if self.population_cap < 1 {
            return Err(Error::Scenario("population_cap must be >= 1".into()));
        }
        for t in &self.thresholds {
            if !t.level.is_finite() {
                return Err(Error::Scenario(format!("threshold level {} is not finite", t.level)));
            }
        }
        Ok(())
    }

    /// Validates the scenario and builds its model.
    pub fn model(&self) -> Result<ProgenyModel> {
        self.validate()?;
        ProgenyModel::new(self.f.build()?, self.g.build()?)
    }
}

/// One trial: the replication means at a given `n` and the two estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialRecord {
    pub n: u64,
    pub trial: u64,
    pub y_bar: f64,
    pub z_bar: f64,
    /// `(Ybar - Zbar) / Ybar`.
    pub est_ratio: f64,
    /// `(Ybar - mu_g) / Ybar`.
    pub est_meaninit: f64,
}

fn ratio_estimate(sum_y: u64, sum_z: u64) -> f64 {
    (sum_y - sum_z) as f64 / sum_y as f64
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Generator of the (arm, n, trial) cell.
pub fn trial_rng(master_seed: u64, arm: u64, n: u64, trial: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut state = splitmix64(master_seed ^ splitmix64(arm.wrapping_add(splitmix64(n))));
    for chunk in key.chunks_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(trial);
    rng
}

/// Sums of `Y` and `Z` over `n` replications.
fn run_trial(sampler: &ProgenySampler, seed: u64, arm: u64, n: u64, trial: u64) -> Result<(u64, u64)> {
    let mut rng = trial_rng(seed, arm, n, trial);
    let mut sum_y = 0u64;
    let mut sum_z = 0u64;
    for _ in 0..n {
        let (y, z) = sampler.sample(&mut rng)?;
        sum_y += y;
        sum_z += z;
    }
    Ok((sum_y, sum_z))
}

/// Number of trials at `n` whose sums satisfy `event`.
fn count_hits<E>(sampler: &ProgenySampler, seed: u64, arm: u64, n: u64, trials: u64, event: E) -> Result<u64>
where
    E: Fn(u64, u64) -> bool + Sync,
{
    (0..trials)
        .into_par_iter()
        .map(|t| run_trial(sampler, seed, arm, n, t).map(|(y, z)| u64::from(event(y, z))))
        .try_reduce(|| 0, |a, b| Ok(a + b))
}

/// Every (n, trial) record of the scenario, ordered by `n` then trial.
pub fn replicate(scenario: &LdpScenario) -> Result<Vec<TrialRecord>> {
    let model = scenario.model()?;
    let sampler = ProgenySampler::new(model.f(), model.g(), scenario.population_cap)?;
    let mu_g = model.mu_g();
    let mut out = Vec::with_capacity(scenario.n_schedule.len() * scenario.trials as usize);
    for &n in &scenario.n_schedule {
        let records: Vec<TrialRecord> = (0..scenario.trials)
            .into_par_iter()
            .map(|trial| {
                let (sum_y, sum_z) = run_trial(&sampler, scenario.master_seed, ARM_RANDOM_START, n, trial)?;
                let y_bar = sum_y as f64 / n as f64;
                Ok(TrialRecord {
                    n,
                    trial,
                    y_bar,
                    z_bar: sum_z as f64 / n as f64,
                    est_ratio: ratio_estimate(sum_y, sum_z),
                    est_meaninit: (y_bar - mu_g) / y_bar,
                })
            })
            .collect::<Result<_>>()?;
        out.extend(records);
    }
    Ok(out)
}

/// Finite-`n` decay-rate estimate `-(1/n) log(hits / trials)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalRate {
    pub n: u64,
    pub hits: u64,
    pub trials: u64,
    /// With `censored`, the one-sided bound `log(trials) / n`.
    pub rate_estimate: f64,
    /// Half the width of the rate interval induced by the 95% Wilson
    /// interval on `hits / trials`; infinite when censored.
    pub ci_halfwidth: f64,
    pub censored: bool,
}

impl EmpiricalRate {
    pub fn from_counts(n: u64, hits: u64, trials: u64) -> Self {
        let nf = n as f64;
        if hits == 0 {
            return Self {
                n,
                hits,
                trials,
                rate_estimate: (trials as f64).ln() / nf,
                ci_halfwidth: f64::INFINITY,
                censored: true,
            };
        }
        let (lo, hi) = wilson_interval(hits, trials);
        let rate = |p: f64| -p.ln() / nf;
        Self {
            n,
            hits,
            trials,
            rate_estimate: rate(hits as f64 / trials as f64),
            ci_halfwidth: 0.5 * (rate(lo) - rate(hi)),
            censored: false,
        }
    }
}

/// 95% Wilson score interval for a binomial proportion.
pub fn wilson_interval(hits: u64, trials: u64) -> (f64, f64) {
    let n = trials as f64;
    let p = hits as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if hits == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if hits == trials { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

/// Empirical decay rate of `threshold` at every `n` of the schedule.
pub fn empirical_rate(scenario: &LdpScenario, threshold: &Threshold) -> Result<Vec<EmpiricalRate>> {
    let model = scenario.model()?;
    let sampler = ProgenySampler::new(model.f(), model.g(), scenario.population_cap)?;
    let mu_f = model.mu_f();
    scenario
        .n_schedule
        .iter()
        .map(|&n| {
            let hits = count_hits(&sampler, scenario.master_seed, ARM_RANDOM_START, n, scenario.trials, |y, z| {
                threshold.hit(n, y, z, mu_f)
            })?;
            Ok(EmpiricalRate::from_counts(n, hits, scenario.trials))
        })
        .collect()
}

/// Infimum of the relevant rate function over the closure of the event.
///
/// Mean events use `inf_z I(y, z)`, which is nonincreasing towards `nu`
/// from either side; the infimum over `[a, inf)` or `(-inf, a]` is
/// therefore its value at `a` (checked on a short grid beyond `a`).
/// Estimator deviations use the random-start estimator rate at
/// `mu_f - eps` and `mu_f + eps`.
pub fn reference_rate(model: &ProgenyModel, threshold: &Threshold) -> Result<f64> {
    let a = threshold.level;
    match threshold.kind {
        ThresholdKind::MeanGe | ThresholdKind::MeanLe => {
            let nu = model.nu();
            let upward = threshold.kind == ThresholdKind::MeanGe;
            if (upward && a <= nu) || (!upward && a >= nu) {
                return Ok(0.0);
            }
            let mut best = f64::INFINITY;
            for k in 0..=8 {
                let step = (a - nu).abs() * k as f64 / 8.0;
                let y = if upward { a + step } else { a - step };
                best = best.min(rate_progeny_compound(model, y)?.value);
            }
            Ok(best)
        }
        ThresholdKind::EstimatorDev => {
            if a <= 0.0 {
                return Ok(0.0);
            }
            let mu_f = model.mu_f();
            let below = rate_estimator_ratio(model, mu_f - a)?.value;
            let above = rate_estimator_ratio(model, mu_f + a)?.value;
            Ok(below.min(above))
        }
    }
}

/// Tail probabilities of the estimator `(Ybar - Zbar) / Ybar` under the
/// random start and under the deterministic start of `mu_g` ancestors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailRatioRow {
    pub n: u64,
    pub trials: u64,
    pub hits_random: u64,
    pub hits_deterministic: u64,
    pub p_random: f64,
    pub p_deterministic: f64,
    /// `p_deterministic / p_random`; `None` when either arm has no hits.
    pub ratio: Option<f64>,
}

/// Estimates `P(|est - mu_f| >= eps)` under both starts at every `n`.
///
/// The two arms run on independent streams; no coupling is attempted.
pub fn estimator_tail_ratio(scenario: &LdpScenario, eps: f64) -> Result<Vec<TailRatioRow>> {
    let model = scenario.model()?;
    let mu_f = model.mu_f();
    let mu_g = model.mu_g();
    if mu_f <= 0.0 {
        return Err(Error::Hypothesis("tail comparison needs mu_f > 0".into()));
    }
    if (mu_g - mu_g.round()).abs() > 1e-12 {
        return Err(Error::Hypothesis(format!(
            "tail comparison needs an integer mu_g for the deterministic start (got {mu_g})"
        )));
    }
    if !(eps > 0.0) {
        return Err(Error::Argument(format!("eps must be positive (got {eps})")));
    }
    let det_start = Pmf::explicit(&[(mu_g.round() as u64, 1.0)])?;
    let random = ProgenySampler::new(model.f(), model.g(), scenario.population_cap)?;
    let deterministic = ProgenySampler::new(model.f(), &det_start, scenario.population_cap)?;
    let event = Threshold { kind: ThresholdKind::EstimatorDev, level: eps };
    scenario
        .n_schedule
        .iter()
        .map(|&n| {
            let seed = scenario.master_seed;
            let hit = |y, z| event.hit(n, y, z, mu_f);
            let hits_random = count_hits(&random, seed, ARM_RANDOM_START, n, scenario.trials, hit)?;
            let hits_deterministic =
                count_hits(&deterministic, seed, ARM_DETERMINISTIC_START, n, scenario.trials, hit)?;
            let trials = scenario.trials as f64;
            let p_random = hits_random as f64 / trials;
            let p_deterministic = hits_deterministic as f64 / trials;
            let ratio = (hits_random > 0 && hits_deterministic > 0).then(|| p_deterministic / p_random);
            Ok(TailRatioRow {
                n,
                trials: scenario.trials,
                hits_random,
                hits_deterministic,
                p_random,
                p_deterministic,
                ratio,
            })
        })
        .collect()
}

//! Economic and statistical analytics: attack-window coverage by Monte
//! Carlo, detection-delay tables, the per-contract profit model, the
//! symmetric attacker/defender race, Wilson intervals, budget curves and
//! attack-window bisection.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::domain::RunRecord;

pub const MC_SAMPLES: u64 = 100_000;
pub const REVENUE_CAP_USD: f64 = 20_000.0;
pub const INFRA_OVERHEAD_USD: f64 = 3.0;
pub const BOUNTY_FRACTION: f64 = 0.1;
/// z for a two-sided 95% normal interval, as used for the Monte-Carlo CIs.
pub const Z95: f64 = 1.96;

pub const MINUTES_PER_HOUR: f64 = 60.0;
pub const MINUTES_PER_DAY: f64 = 1440.0;

/// The detection delays of the delay table, in minutes, with their labels.
pub const STANDARD_DELAYS: [(&str, f64); 7] = [
    ("0", 0.0),
    ("1h", MINUTES_PER_HOUR),
    ("6h", 6.0 * MINUTES_PER_HOUR),
    ("12h", 12.0 * MINUTES_PER_HOUR),
    ("1d", MINUTES_PER_DAY),
    ("3d", 3.0 * MINUTES_PER_DAY),
    ("7d", 7.0 * MINUTES_PER_DAY),
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EconError {
    #[error("empty distribution")]
    EmptyDistribution,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("oracle is false at the attack block {0}")]
    NotExploitableAtAttackBlock(u64),
    #[error("oracle is not monotone: block {0} contradicts an earlier probe")]
    NonMonotoneOracle(u64),
    #[error("csv: {0}")]
    Csv(String),
}

fn invalid(msg: impl Into<String>) -> EconError {
    EconError::InvalidParameter(msg.into())
}

/// Nonnegative durations in minutes, sampled uniformly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDistribution {
    samples: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn new(samples: Vec<f64>) -> Result<Self, EconError> {
        if samples.is_empty() {
            return Err(EconError::EmptyDistribution);
        }
        if samples.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(invalid("durations must be finite and nonnegative"));
        }
        Ok(EmpiricalDistribution { samples })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        self.samples[rng.random_range(0..self.samples.len())]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub p: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: u64,
}

impl Estimate {
    pub fn standard_error(&self) -> f64 {
        (self.p * (1.0 - self.p) / self.n as f64).sqrt()
    }
}

fn check_delay(delay: f64) -> Result<(), EconError> {
    if !delay.is_finite() || delay < 0.0 {
        return Err(invalid("delay must be finite and nonnegative"));
    }
    Ok(())
}

fn succeeds(runtime: f64, window: f64, delay: f64) -> bool {
    runtime < (window - delay).max(0.0)
}

/// Fraction of `n` seeded (runtime, window) draws where the runtime beats
/// the window shortened by `delay`, with a normal-approximation 95% CI.
pub fn mc_success_probability(
    runtimes: &EmpiricalDistribution,
    windows: &EmpiricalDistribution,
    delay: f64,
    n: u64,
    seed: u64,
) -> Result<Estimate, EconError> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    check_delay(delay)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0u64;
    for _ in 0..n {
        let r = runtimes.sample(&mut rng);
        let w = windows.sample(&mut rng);
        if succeeds(r, w, delay) {
            hits += 1;
        }
    }
    let p = hits as f64 / n as f64;
    let half = Z95 * (p * (1.0 - p) / n as f64).sqrt();
    Ok(Estimate {
        p,
        ci_low: (p - half).max(0.0),
        ci_high: (p + half).min(1.0),
        n,
    })
}

/// The same probability by enumerating every equiprobable pair.
pub fn exact_success_probability(
    runtimes: &EmpiricalDistribution,
    windows: &EmpiricalDistribution,
    delay: f64,
) -> Result<f64, EconError> {
    check_delay(delay)?;
    let hits = runtimes
        .samples
        .iter()
        .flat_map(|r| windows.samples.iter().map(move |w| succeeds(*r, *w, delay)))
        .filter(|s| *s)
        .count();
    Ok(hits as f64 / (runtimes.samples.len() * windows.samples.len()) as f64)
}

/// Seed for one (model, delay) cell, stable across runs and platforms.
pub fn cell_seed(master: u64, model: &str, delay: f64) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(model.as_bytes());
    h.update([0]);
    h.update(delay.to_bits().to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sampling {
    MonteCarlo { n: u64 },
    Exhaustive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayCell {
    pub model: String,
    pub delay_minutes: f64,
    pub p: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// One row per model, one cell per delay; delays must be ascending.
pub fn delay_table(
    models: &[(String, EmpiricalDistribution)],
    windows: &EmpiricalDistribution,
    delays: &[f64],
    sampling: Sampling,
    master_seed: u64,
) -> Result<Vec<DelayCell>, EconError> {
    if delays.windows(2).any(|w| w[0] > w[1]) {
        return Err(invalid("delays must be sorted ascending"));
    }
    let mut out = Vec::with_capacity(models.len() * delays.len());
    for (model, runtimes) in models {
        for &d in delays {
            let (p, ci_low, ci_high) = match sampling {
                Sampling::MonteCarlo { n } => {
                    let e = mc_success_probability(runtimes, windows, d, n, cell_seed(master_seed, model, d))?;
                    (e.p, e.ci_low, e.ci_high)
                }
                Sampling::Exhaustive => {
                    let p = exact_success_probability(runtimes, windows, d)?;
                    (p, p, p)
                }
            };
            out.push(DelayCell {
                model: model.clone(),
                delay_minutes: d,
                p,
                ci_low,
                ci_high,
            });
        }
    }
    Ok(out)
}

/// Linear interpolation between closest ranks; `q` in [0, 100].
pub fn percentile(values: &[f64], q: f64) -> Result<f64, EconError> {
    if values.is_empty() {
        return Err(EconError::EmptyDistribution);
    }
    if !(0.0..=100.0).contains(&q) {
        return Err(invalid("percentile outside [0, 100]"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q / 100.0 * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Ok(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

/// Mean revenue with each sample capped at `cap`.
pub fn capped_mean_revenue(revenues: &[f64], cap: f64) -> Result<f64, EconError> {
    if revenues.is_empty() {
        return Err(EconError::EmptyDistribution);
    }
    Ok(revenues.iter().map(|r| r.min(cap)).sum::<f64>() / revenues.len() as f64)
}

/// 95th-percentile cost plus the fixed infrastructure overhead.
pub fn cost_per_analysis(costs: &[f64], overhead: f64) -> Result<f64, EconError> {
    Ok(percentile(costs, 95.0)? + overhead)
}

/// Inputs of the per-contract profit model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EconParams {
    /// Vulnerability incidence rate.
    pub rho: f64,
    /// Per-attempt success rate.
    pub success_rate: f64,
    /// Capped mean revenue, USD.
    pub revenue_usd: f64,
    /// Cost per analysis, USD.
    pub cost_usd: f64,
}

impl EconParams {
    pub fn validate(&self) -> Result<(), EconError> {
        let all = [self.rho, self.success_rate, self.revenue_usd, self.cost_usd];
        if all.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(invalid("parameters must be finite and nonnegative"));
        }
        if self.rho > 1.0 || self.success_rate > 1.0 {
            return Err(invalid("rates must not exceed 1"));
        }
        Ok(())
    }
}

/// Expected USD profit per analyzed contract.
pub fn profit_per_contract(p_window: f64, params: &EconParams) -> f64 {
    params.rho * p_window * params.success_rate * params.revenue_usd - params.cost_usd
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEconomics {
    pub model: String,
    pub success_rate: f64,
    pub revenue_usd: f64,
    pub cost_usd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfitCell {
    pub rho: f64,
    pub delay_minutes: f64,
    pub model: String,
    pub pi_usd: f64,
}

/// Profit over a (rho x delay) grid per model, with window probabilities
/// taken from a delay table.
pub fn profit_grid(
    models: &[ModelEconomics],
    delay_cells: &[DelayCell],
    rhos: &[f64],
) -> Result<Vec<ProfitCell>, EconError> {
    let mut out = Vec::new();
    for m in models {
        let cells: Vec<&DelayCell> = delay_cells.iter().filter(|c| c.model == m.model).collect();
        if cells.is_empty() {
            return Err(invalid(format!("no delay cells for model {}", m.model)));
        }
        for &rho in rhos {
            let params = EconParams {
                rho,
                success_rate: m.success_rate,
                revenue_usd: m.revenue_usd,
                cost_usd: m.cost_usd,
            };
            params.validate()?;
            for c in &cells {
                out.push(ProfitCell {
                    rho,
                    delay_minutes: c.delay_minutes,
                    model: m.model.clone(),
                    pi_usd: profit_per_contract(c.p, &params),
                });
            }
        }
    }
    Ok(out)
}

/// A break-even crossing between two adjacent grid cells along the rho axis
/// for fixed model and delay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignChange {
    pub model: String,
    pub delay_minutes: f64,
    pub rho_below: f64,
    pub rho_above: f64,
}

pub fn break_even_crossings(grid: &[ProfitCell]) -> Vec<SignChange> {
    let mut rows: BTreeMap<(String, u64), Vec<&ProfitCell>> = BTreeMap::new();
    for c in grid {
        rows.entry((c.model.clone(), c.delay_minutes.to_bits())).or_default().push(c);
    }
    let mut out = Vec::new();
    for ((model, delay), mut row) in rows {
        row.sort_by(|a, b| a.rho.total_cmp(&b.rho));
        for w in row.windows(2) {
            if (w[0].pi_usd > 0.0) != (w[1].pi_usd > 0.0) {
                out.push(SignChange {
                    model: model.clone(),
                    delay_minutes: f64::from_bits(delay),
                    rho_below: w[0].rho,
                    rho_above: w[1].rho,
                });
            }
        }
    }
    out
}

/// Inputs of the symmetric attacker/defender race.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RaceParams {
    pub rho: Decimal,
    pub exploit_value: Decimal,
    pub scan_cost: Decimal,
    pub bounty_fraction: Decimal,
}

/// Expected payoff per scan for (attacker, defender); each side wins half
/// the races.
pub fn race_payoffs(p: &RaceParams) -> (Decimal, Decimal) {
    let half = p.rho * p.exploit_value / Decimal::TWO;
    (half - p.scan_cost, half * p.bounty_fraction - p.scan_cost)
}

/// How many further scans one win pays for.
pub fn scans_fundable(payout: Decimal, scan_cost: Decimal) -> Option<Decimal> {
    (!scan_cost.is_zero()).then(|| payout / scan_cost)
}

fn to_rational(d: Decimal) -> BigRational {
    BigRational::new(BigInt::from(d.mantissa()), BigInt::from(10u8).pow(d.scale()))
}

/// Exact break-even exploit values (attacker, defender).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BreakEven {
    pub attacker: BigRational,
    pub defender: BigRational,
}

impl BreakEven {
    /// Decimal rendering, rounded to 28 significant digits if the value
    /// does not terminate; `None` if out of range.
    pub fn to_decimals(&self) -> Option<(Decimal, Decimal)> {
        let f = |r: &BigRational| {
            let n: Decimal = r.numer().to_string().parse().ok()?;
            let d: Decimal = r.denom().to_string().parse().ok()?;
            n.checked_div(d)
        };
        Some((f(&self.attacker)?, f(&self.defender)?))
    }
}

/// `2c/rho` and `2c/(b rho)`, in exact rational arithmetic.
pub fn break_even_values(rho: Decimal, c: Decimal, b: Decimal) -> Result<BreakEven, EconError> {
    if rho <= Decimal::ZERO || b <= Decimal::ZERO || c < Decimal::ZERO {
        return Err(invalid("rho and b must be positive, c nonnegative"));
    }
    let two = BigRational::from_integer(BigInt::from(2));
    let attacker = two * to_rational(c) / to_rational(rho);
    let defender = attacker.clone() / to_rational(b);
    Ok(BreakEven { attacker, defender })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaceRow {
    pub rho: Decimal,
    pub exploit_value: Decimal,
    pub payoff_att: Decimal,
    pub payoff_def: Decimal,
}

pub fn race_curves(rhos: &[Decimal], values: &[Decimal], scan_cost: Decimal, b: Decimal) -> Vec<RaceRow> {
    let mut out = Vec::new();
    for &rho in rhos {
        for &v in values {
            let (payoff_att, payoff_def) = race_payoffs(&RaceParams {
                rho,
                exploit_value: v,
                scan_cost,
                bounty_fraction: b,
            });
            out.push(RaceRow {
                rho,
                exploit_value: v,
                payoff_att,
                payoff_def,
            });
        }
    }
    out
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64, confidence: f64) -> Result<(f64, f64), EconError> {
    if n == 0 || k > n {
        return Err(invalid("need 0 <= k <= n and n >= 1"));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(invalid("confidence must be in (0, 1)"));
    }
    let normal = Normal::standard();
    let z = normal.inverse_cdf(1.0 - (1.0 - confidence) / 2.0);
    let n_f = n as f64;
    let p = k as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = z * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    let low = if k == 0 { 0.0 } else { (center - half).max(0.0) };
    let high = if k == n { 1.0 } else { (center + half).min(1.0) };
    Ok((low, high))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetRate {
    pub k: u32,
    pub successes: u64,
    pub rate: f64,
    /// `rate(k) - rate(k - 1)`; equals `rate(1)` at k = 1.
    pub marginal: f64,
}

/// Success rate within the first `k` executions for k = 1..=k_max, from
/// the execution index of each run's first success.
pub fn success_by_budget_counts(first_success: &[Option<u32>], k_max: u32) -> Vec<BudgetRate> {
    let n = first_success.len().max(1) as f64;
    let mut prev = 0.0;
    (1..=k_max)
        .map(|k| {
            let successes = first_success.iter().filter(|s| s.is_some_and(|i| i <= k)).count() as u64;
            let rate = if first_success.is_empty() { 0.0 } else { successes as f64 / n };
            let r = BudgetRate {
                k,
                successes,
                rate,
                marginal: rate - prev,
            };
            prev = rate;
            r
        })
        .collect()
}

pub fn success_by_budget(records: &[RunRecord], k_max: u32) -> Vec<BudgetRate> {
    let firsts: Vec<Option<u32>> = records.iter().map(RunRecord::success_iteration).collect();
    success_by_budget_counts(&firsts, k_max)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bisection {
    /// First block where the oracle holds.
    pub introduced: u64,
    /// Blocks from introduction to the attack.
    pub window_blocks: u64,
    pub probes: u32,
}

/// `ceil(log2(blocks)) + 1`, where `blocks` counts the inclusive range.
pub fn probe_bound(genesis: u64, attack_block: u64) -> u32 {
    let blocks = attack_block - genesis + 1;
    let ceil_log2 = if blocks <= 1 { 0 } else { 64 - (blocks - 1).leading_zeros() };
    ceil_log2 + 1
}

/// Smallest block in `[genesis, attack_block]` where `oracle` holds,
/// assuming the oracle is monotone. The attack block is only probed when
/// every earlier candidate has been ruled out.
pub fn bisect_attack_window(
    mut oracle: impl FnMut(u64) -> bool,
    genesis: u64,
    attack_block: u64,
) -> Result<Bisection, EconError> {
    if genesis > attack_block {
        return Err(invalid("genesis after attack block"));
    }
    let (mut lo, mut hi) = (genesis, attack_block);
    let mut probes = 0u32;
    let mut hi_confirmed = false;
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        probes += 1;
        if oracle(mid) {
            hi = mid;
            hi_confirmed = true;
        } else {
            lo = mid + 1;
        }
    }
    if !hi_confirmed {
        probes += 1;
        if !oracle(attack_block) {
            return Err(EconError::NotExploitableAtAttackBlock(attack_block));
        }
    }
    Ok(Bisection {
        introduced: lo,
        window_blocks: attack_block - lo,
        probes,
    })
}

/// Bisection plus spot checks that catch non-monotone oracles: the attack
/// block must hold, the block before the result must not, and the genesis
/// block must not unless it is the result.
pub fn bisect_attack_window_verified(
    mut oracle: impl FnMut(u64) -> bool,
    genesis: u64,
    attack_block: u64,
) -> Result<Bisection, EconError> {
    let mut seen: BTreeMap<u64, bool> = BTreeMap::new();
    let mut probe = |b: u64| *seen.entry(b).or_insert_with(|| oracle(b));
    if !probe(attack_block) {
        return Err(EconError::NotExploitableAtAttackBlock(attack_block));
    }
    let mut r = bisect_attack_window(&mut probe, genesis, attack_block)?;
    if r.introduced > genesis && probe(r.introduced - 1) {
        return Err(EconError::NonMonotoneOracle(r.introduced - 1));
    }
    if r.introduced > genesis && probe(genesis) {
        return Err(EconError::NonMonotoneOracle(genesis));
    }
    if !probe(r.introduced) {
        return Err(EconError::NonMonotoneOracle(r.introduced));
    }
    r.probes = seen.len() as u32;
    Ok(r)
}

fn default_samples() -> u64 {
    MC_SAMPLES
}

fn default_delays() -> Vec<f64> {
    STANDARD_DELAYS.iter().map(|d| d.1).collect()
}

fn default_cap() -> f64 {
    REVENUE_CAP_USD
}

fn default_overhead() -> f64 {
    INFRA_OVERHEAD_USD
}

/// Observations for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelObservations {
    pub name: String,
    pub runtimes_minutes: Vec<f64>,
    pub success_rate: f64,
    pub revenues_usd: Vec<f64>,
    pub costs_usd: Vec<f64>,
}

/// Input file of the delay-table and profit-grid commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EconConfig {
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub samples: u64,
    pub windows_minutes: Vec<f64>,
    #[serde(default = "default_delays")]
    pub delays_minutes: Vec<f64>,
    #[serde(default)]
    pub rhos: Vec<f64>,
    #[serde(default = "default_cap")]
    pub revenue_cap_usd: f64,
    #[serde(default = "default_overhead")]
    pub overhead_usd: f64,
    #[serde(rename = "model")]
    pub models: Vec<ModelObservations>,
}

impl EconConfig {
    pub fn delay_table(&self) -> Result<Vec<DelayCell>, EconError> {
        let windows = EmpiricalDistribution::new(self.windows_minutes.clone())?;
        let models = self
            .models
            .iter()
            .map(|m| Ok((m.name.clone(), EmpiricalDistribution::new(m.runtimes_minutes.clone())?)))
            .collect::<Result<Vec<_>, EconError>>()?;
        delay_table(&models, &windows, &self.delays_minutes, Sampling::MonteCarlo { n: self.samples }, self.seed)
    }

    pub fn economics(&self) -> Result<Vec<ModelEconomics>, EconError> {
        self.models
            .iter()
            .map(|m| {
                Ok(ModelEconomics {
                    model: m.name.clone(),
                    success_rate: m.success_rate,
                    revenue_usd: capped_mean_revenue(&m.revenues_usd, self.revenue_cap_usd)?,
                    cost_usd: cost_per_analysis(&m.costs_usd, self.overhead_usd)?,
                })
            })
            .collect()
    }

    pub fn profit_grid(&self) -> Result<Vec<ProfitCell>, EconError> {
        if self.rhos.is_empty() {
            return Err(invalid("profit grid needs at least one rho"));
        }
        profit_grid(&self.economics()?, &self.delay_table()?, &self.rhos)
    }
}

/// Renders serializable rows as CSV with a header line.
pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<String, EconError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| EconError::Csv(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| EconError::Csv(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| EconError::Csv(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn d(s: &str) -> Decimal {
        s.parse().unwrap()
    }

    fn dist(v: &[f64]) -> EmpiricalDistribution {
        EmpiricalDistribution::new(v.to_vec()).unwrap()
    }

    #[test]
    fn degenerate_monte_carlo() {
        let r = dist(&[1.0]);
        let w = dist(&[2.0]);
        assert_eq!(mc_success_probability(&r, &w, 0.0, 1000, 1).unwrap().p, 1.0);
        assert_eq!(mc_success_probability(&r, &w, 2.0, 1000, 1).unwrap().p, 0.0);
        assert_eq!(EmpiricalDistribution::new(vec![]), Err(EconError::EmptyDistribution));
    }

    #[test]
    fn two_point_supports() {
        let r = dist(&[1.0, 3.0]);
        let w = dist(&[2.0, 4.0]);
        assert_eq!(exact_success_probability(&r, &w, 0.0).unwrap(), 0.75);
        let e = mc_success_probability(&r, &w, 0.0, MC_SAMPLES, 7).unwrap();
        assert!(e.ci_low <= 0.75 && 0.75 <= e.ci_high, "{e:?}");
        assert_eq!(e, mc_success_probability(&r, &w, 0.0, MC_SAMPLES, 7).unwrap());
    }

    #[test]
    fn delay_table_rows() {
        let models = vec![("a".to_string(), dist(&[1.0])), ("b".to_string(), dist(&[1.0]))];
        let cells = delay_table(&models, &dist(&[2.0]), &[0.0, 2.0], Sampling::MonteCarlo { n: 100 }, 3).unwrap();
        let ps: Vec<f64> = cells.iter().map(|c| c.p).collect();
        assert_eq!(ps, vec![1.0, 0.0, 1.0, 0.0]);
        assert!(delay_table(&models, &dist(&[2.0]), &[2.0, 0.0], Sampling::Exhaustive, 3).is_err());
        let labels: Vec<&str> = STANDARD_DELAYS.iter().map(|d| d.0).collect();
        assert_eq!(labels, ["0", "1h", "6h", "12h", "1d", "3d", "7d"]);
    }

    #[test]
    fn equal_models_equal_seeds() {
        let r = dist(&[1.0, 5.0, 30.0]);
        let w = dist(&[2.0, 40.0]);
        let a = mc_success_probability(&r, &w, 1.0, 5000, cell_seed(9, "m", 1.0)).unwrap();
        let b = mc_success_probability(&r, &w, 1.0, 5000, cell_seed(9, "m", 1.0)).unwrap();
        assert_eq!(a, b);
        assert_ne!(cell_seed(9, "m", 1.0), cell_seed(9, "n", 1.0));
    }

    #[test]
    fn profit_model() {
        let p = EconParams {
            rho: 0.001,
            success_rate: 0.5,
            revenue_usd: 20_000.0,
            cost_usd: 6.0,
        };
        assert!((profit_per_contract(0.5, &p) - (0.001 * 0.5 * 0.5 * 20_000.0 - 6.0)).abs() < 1e-12);
        assert!((profit_per_contract(0.5, &p) + 1.0).abs() < 1e-9);
        assert_eq!(profit_per_contract(0.5, &EconParams { rho: 0.0, ..p }), -6.0);
        assert_eq!(capped_mean_revenue(&[100.0, 1e9], REVENUE_CAP_USD).unwrap(), 10_050.0);
        assert_eq!(percentile(&[1.0, 2.0, 3.0, 4.0, 5.0], 95.0).unwrap(), 4.8);
        assert_eq!(cost_per_analysis(&[1.0], INFRA_OVERHEAD_USD).unwrap(), 4.0);
    }

    #[test]
    fn grid_crossings() {
        let models = vec![ModelEconomics {
            model: "m".into(),
            success_rate: 0.5,
            revenue_usd: 20_000.0,
            cost_usd: 6.0,
        }];
        let cells = vec![DelayCell {
            model: "m".into(),
            delay_minutes: 0.0,
            p: 1.0,
            ci_low: 1.0,
            ci_high: 1.0,
        }];
        let grid = profit_grid(&models, &cells, &[0.0001, 0.001, 0.01]).unwrap();
        let x = break_even_crossings(&grid);
        assert_eq!(x.len(), 1);
        assert_eq!((x[0].rho_below, x[0].rho_above), (0.0001, 0.001));
        let csv = to_csv(&grid).unwrap();
        assert!(csv.starts_with("rho,delay_minutes,model,pi_usd\n"));
    }

    #[test]
    fn race_break_even() {
        let base = RaceParams {
            rho: d("0.001"),
            exploit_value: d("6000"),
            scan_cost: d("3"),
            bounty_fraction: d("0.1"),
        };
        assert_eq!(race_payoffs(&base).0, Decimal::ZERO);
        let def = race_payoffs(&RaceParams {
            exploit_value: d("60000"),
            ..base
        });
        assert_eq!(def.1, Decimal::ZERO);
        let sym = race_payoffs(&RaceParams {
            bounty_fraction: Decimal::ONE,
            ..base
        });
        assert_eq!(sym.0, sym.1);
        assert_eq!(scans_fundable(d("100000"), d("3")).unwrap().round(), d("33333"));
    }

    #[test]
    fn break_even_exact() {
        let be = break_even_values(d("0.001"), d("3"), d("0.1")).unwrap();
        assert_eq!(be.to_decimals(), Some((d("6000"), d("60000"))));
        assert!(break_even_values(Decimal::ZERO, d("3"), d("0.1")).is_err());
    }

    #[test]
    fn wilson_examples() {
        let (lo, hi) = wilson_interval(39, 72, 0.95).unwrap();
        assert_eq!(((lo * 100.0).round(), (hi * 100.0).round()), (43.0, 65.0));
        let (lo, hi) = wilson_interval(7, 72, 0.95).unwrap();
        assert_eq!(((lo * 100.0).round(), (hi * 100.0).round()), (5.0, 19.0));
        assert_eq!(wilson_interval(0, 10, 0.95).unwrap().0, 0.0);
        assert!(wilson_interval(3, 2, 0.95).is_err());
    }

    #[test]
    fn budget_rates() {
        let r = success_by_budget_counts(&[Some(1), Some(2), Some(2), None], 5);
        assert_eq!(r[1].rate, 0.75);
        assert_eq!(r[1].marginal, 0.5);
        assert!(success_by_budget_counts(&[None, None], 5).iter().all(|b| b.rate == 0.0));
        let mut firsts = vec![Some(1); 39];
        firsts.extend(vec![None; 33]);
        assert_eq!((success_by_budget_counts(&firsts, 5)[4].rate * 1000.0).round(), 542.0);
    }

    #[test]
    fn bisection_examples() {
        let r = bisect_attack_window(|b| b >= 1500, 0, 2000).unwrap();
        assert_eq!(r.introduced, 1500);
        assert_eq!(r.window_blocks, 500);
        assert!(r.probes <= 11);
        assert_eq!(bisect_attack_window(|_| true, 10, 20).unwrap().introduced, 10);
        assert_eq!(
            bisect_attack_window(|_| false, 10, 20),
            Err(EconError::NotExploitableAtAttackBlock(20))
        );
        assert_eq!(
            bisect_attack_window_verified(|b| b == 20 || b == 10, 10, 20),
            Err(EconError::NonMonotoneOracle(10))
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn break_even_ratio_is_inverse_bounty(
            rho in 1u32..100_000, c in 0u32..10_000, b in 1u32..10_000,
        ) {
            let rho = Decimal::new(rho as i64, 6);
            let b = Decimal::new(b as i64, 4);
            let be = break_even_values(rho, Decimal::from(c), b).unwrap();
            if c > 0 {
                let ratio = be.defender / be.attacker;
                prop_assert_eq!(ratio, BigRational::from_integer(1.into()) / to_rational(b));
            }
        }

        #[test]
        fn wilson_contains_point_estimate(n in 1u64..500, frac in 0.0f64..=1.0) {
            let k = ((n as f64) * frac).floor() as u64;
            let (lo, hi) = wilson_interval(k, n, 0.95).unwrap();
            let p = k as f64 / n as f64;
            prop_assert!(lo <= p + 1e-12 && p <= hi + 1e-12);
            let (lo4, hi4) = wilson_interval(4 * k, 4 * n, 0.95).unwrap();
            prop_assert!(hi4 - lo4 <= hi - lo + 1e-12);
        }

        #[test]
        fn exact_probability_nonincreasing_in_delay(
            r in proptest::collection::vec(0.0f64..100.0, 1..6),
            w in proptest::collection::vec(0.0f64..100.0, 1..6),
            mut d in proptest::collection::vec(0.0f64..100.0, 2..6),
        ) {
            d.sort_by(f64::total_cmp);
            let cells = delay_table(&[("m".into(), dist(&r))], &dist(&w), &d, Sampling::Exhaustive, 0).unwrap();
            for pair in cells.windows(2) {
                prop_assert!(pair[1].p <= pair[0].p);
            }
        }

        #[test]
        fn bisection_probe_bound(genesis in 0u64..1_000_000, span in 0u64..5_000_000, frac in 0.0f64..=1.0) {
            let attack = genesis + span;
            let intro = genesis + ((span as f64) * frac) as u64;
            let r = bisect_attack_window(|b| b >= intro, genesis, attack).unwrap();
            prop_assert_eq!(r.introduced, intro);
            prop_assert!(r.probes <= probe_bound(genesis, attack));
        }
    }
}

//! The regenerated process: every exit through `eta` or `theta` collects a
//! harvest and resets the stock to `x0` instantaneously. Cycles are i.i.d.,
//! so the long-run harvest rate `R(t)/t` tends to `E[Q]/E[T]`.
//!
//! `N(t)` counts cycles *completed* by time `t`, and `R(t)` sums their
//! rewards; no reward is booked at time zero and the final incomplete cycle
//! contributes elapsed time only.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::functionals::FunctionalContext;
use crate::numerics::rng::{run_indexed, streams, RngStream};
use crate::ou_model::{Boundary, Corridor, FirstPassageSampler, OuParams, PassageOptions};
use crate::real::{to_f64, Real};

/// Minimum number of completed cycles for a standard-error estimate.
pub const MIN_CYCLES_FOR_CHECK: usize = 100;

pub const INDEXING_NOTE: &str =
    "N(t) counts completed cycles; rewards are summed over cycles 1..N(t) with no harvest at time zero";

/// Harvest collected on exit through each boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarvestPolicy<T> {
    pub q_eta: T,
    pub q_theta: T,
}

impl<T: Real> HarvestPolicy<T> {
    pub fn new(q_eta: T, q_theta: T) -> Self {
        HarvestPolicy { q_eta, q_theta }
    }

    /// `Q(y) = y - x0`: restock `eta - x0` at the floor, harvest `theta - x0` at the ceiling.
    pub fn level_difference(corridor: &Corridor<T>) -> Self {
        HarvestPolicy {
            q_eta: corridor.eta - corridor.x0,
            q_theta: corridor.theta - corridor.x0,
        }
    }

    pub fn constant(c: T) -> Self {
        HarvestPolicy {
            q_eta: c,
            q_theta: c,
        }
    }

    pub fn reward(&self, boundary: Boundary) -> T {
        match boundary {
            Boundary::Lower => self.q_eta,
            Boundary::Upper => self.q_theta,
        }
    }
}

/// `E[Q] = q_theta + (q_eta - q_theta)·rho(x)`, evaluated as
/// `q_eta·rho + q_theta·(1 - rho)` with both probabilities computed directly.
pub fn expected_reward<T: Real>(
    ctx: &FunctionalContext<T>,
    x: T,
    policy: &HarvestPolicy<T>,
) -> Result<T> {
    Ok(policy.q_eta * ctx.rho(x)? + policy.q_theta * ctx.rho_complement(x)?)
}

/// Long-run harvest rate `E[Q]/E[T]` for regeneration level `x`.
pub fn expected_ratio<T: Real>(
    ctx: &FunctionalContext<T>,
    x: T,
    policy: &HarvestPolicy<T>,
) -> Result<T> {
    ensure!(
        ctx.eta() < x && x < ctx.theta(),
        "x={x} must lie strictly inside (eta={}, theta={}); the boundary value is a limit",
        ctx.eta(),
        ctx.theta()
    );
    Ok(expected_reward(ctx, x, policy)? / ctx.psi(x)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CycleRecord<T> {
    pub boundary: Boundary,
    pub duration: T,
    pub reward: T,
}

/// Outcome of one regenerated run up to a horizon.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RenewalRunStats<T> {
    pub horizon: T,
    pub n_cycles: usize,
    pub total_reward: T,
    pub cycle_records: Vec<CycleRecord<T>>,
    /// `R(t)/t`
    pub time_average: T,
}

impl<T: Real> RenewalRunStats<T> {
    fn from_records(horizon: T, cycle_records: Vec<CycleRecord<T>>) -> Self {
        let total_reward = cycle_records
            .iter()
            .fold(T::zero(), |acc, c| acc + c.reward);
        RenewalRunStats {
            horizon,
            n_cycles: cycle_records.len(),
            total_reward,
            time_average: total_reward / horizon,
            cycle_records,
        }
    }

    /// Concatenates independent runs; the horizon is the total simulated time.
    pub fn pool(runs: &[RenewalRunStats<T>]) -> Result<Self> {
        ensure!(!runs.is_empty(), "cannot pool zero runs");
        let horizon = runs.iter().fold(T::zero(), |acc, r| acc + r.horizon);
        let records = runs
            .iter()
            .flat_map(|r| r.cycle_records.iter().copied())
            .collect();
        Ok(Self::from_records(horizon, records))
    }

    pub fn n_lower(&self) -> usize {
        self.cycle_records
            .iter()
            .filter(|c| c.boundary == Boundary::Lower)
            .count()
    }

    pub fn n_upper(&self) -> usize {
        self.n_cycles - self.n_lower()
    }

    pub fn lower_fraction(&self) -> f64 {
        self.n_lower() as f64 / self.n_cycles as f64
    }

    pub fn mean_duration(&self) -> f64 {
        self.cycle_records
            .iter()
            .map(|c| to_f64(c.duration))
            .sum::<f64>()
            / self.n_cycles as f64
    }

    pub fn mean_reward(&self) -> f64 {
        to_f64(self.total_reward) / self.n_cycles as f64
    }
}

/// Simulates the regenerated process on `[0, horizon]`.
pub fn simulate_renewal<T: Real>(
    corridor: &Corridor<T>,
    policy: &HarvestPolicy<T>,
    horizon: T,
    h: T,
    params: &OuParams<T>,
    stream: &mut RngStream,
    options: PassageOptions,
) -> Result<RenewalRunStats<T>> {
    ensure!(
        horizon > T::zero() && horizon.is_finite(),
        "horizon={horizon} must be > 0"
    );
    let sampler = FirstPassageSampler::new(corridor, h, params, options)?;
    let mut elapsed = T::zero();
    let mut records = Vec::new();
    loop {
        let outcome = sampler.sample(stream)?;
        elapsed = elapsed + outcome.hit_time;
        if elapsed > horizon {
            break;
        }
        records.push(CycleRecord {
            boundary: outcome.boundary,
            duration: outcome.hit_time,
            reward: policy.reward(outcome.boundary),
        });
    }
    Ok(RenewalRunStats::from_records(horizon, records))
}

/// Independent replications, replication `r` on stream `r`. The result does
/// not depend on `workers`; each entry fails or succeeds on its own.
#[allow(clippy::too_many_arguments)]
pub fn simulate_replications<T: Real>(
    corridor: &Corridor<T>,
    policy: &HarvestPolicy<T>,
    horizon: T,
    h: T,
    params: &OuParams<T>,
    options: PassageOptions,
    seed: u64,
    replications: usize,
    workers: usize,
) -> Result<Vec<Result<RenewalRunStats<T>>>> {
    run_indexed(workers, replications, |r| {
        let mut stream = RngStream::new(seed, streams::RENEWAL + r as u64);
        Ok(simulate_renewal(
            corridor,
            policy,
            horizon,
            h,
            params,
            &mut stream,
            options,
        ))
    })
}

/// Comparison of a simulated `R(t)/t` with the analytic `E[Q]/E[T]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RenewalCheck {
    pub n_cycles: usize,
    pub time_average: f64,
    pub analytic_ratio: f64,
    pub difference: f64,
    /// Ratio-estimator (delta method) standard error from cycle-level variability.
    pub standard_error: f64,
    pub note: &'static str,
}

impl RenewalCheck {
    /// `|difference|` in standard errors.
    pub fn z_score(&self) -> f64 {
        if self.standard_error > 0.0 {
            self.difference.abs() / self.standard_error
        } else if self.difference == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

pub fn renewal_theorem_check<T: Real>(
    stats: &RenewalRunStats<T>,
    analytic_ratio: T,
) -> Result<RenewalCheck> {
    let n = stats.n_cycles;
    if n < MIN_CYCLES_FOR_CHECK {
        return Err(Error::InsufficientCycles {
            n,
            required: MIN_CYCLES_FOR_CHECK,
        });
    }
    let durations: Vec<f64> = stats
        .cycle_records
        .iter()
        .map(|c| to_f64(c.duration))
        .collect();
    let rewards: Vec<f64> = stats
        .cycle_records
        .iter()
        .map(|c| to_f64(c.reward))
        .collect();
    let total_time: f64 = durations.iter().sum();
    let total_reward: f64 = rewards.iter().sum();
    let rate = total_reward / total_time;
    let nf = n as f64;
    let residual_ss: f64 = rewards
        .iter()
        .zip(&durations)
        .map(|(q, t)| (q - rate * t).powi(2))
        .sum();
    let mean_duration = total_time / nf;
    let standard_error = (residual_ss / (nf * (nf - 1.0))).sqrt() / mean_duration;
    let time_average = to_f64(stats.time_average);
    let analytic = to_f64(analytic_ratio);
    Ok(RenewalCheck {
        n_cycles: n,
        time_average,
        analytic_ratio: analytic,
        difference: time_average - analytic,
        standard_error,
        note: INDEXING_NOTE,
    })
}

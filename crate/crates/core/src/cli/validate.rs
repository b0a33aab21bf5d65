//! Analytic-versus-simulated cross-checks run by `ou-harvest validate`.

use serde::Serialize;

use super::commands::{build_model, Model};
use super::config::RunConfig;
use super::{CliError, PsiVariant};
use crate::functionals::{ExitTimeDenominator, FunctionalContext};
use crate::numerics::diff::{central_diff, central_second_diff};
use crate::numerics::rng::{run_indexed, streams, RngStream};
use crate::ou_model::{
    simulate_passages, ExactTransition, FirstPassageSampler, OuParams, PassageOptions,
    PassageSummary,
};
use crate::renewal::{
    expected_ratio, renewal_theorem_check, simulate_replications, HarvestPolicy, RenewalRunStats,
};
use crate::sign_analysis::{has_sign, linspace, scan_grid};

pub const DEFAULT_PATHS: usize = 100_000;
pub const MOMENT_DRAWS: usize = 1_000_000;
const MOMENT_CHUNKS: usize = 100;

/// One property: passes when `measured <= tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, measured: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Check {
            name: name.to_string(),
            passed: measured.is_finite() && measured <= tolerance,
            measured,
            tolerance,
            detail: detail.into(),
        }
    }
}

/// Mean and variance of `n` draws, accumulated around `center`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Moments {
    pub n: usize,
    sum: f64,
    sum_sq: f64,
    center: f64,
}

impl Moments {
    fn from_draws(center: f64, draws: impl Iterator<Item = f64>) -> Self {
        let mut m = Moments {
            center,
            ..Moments::default()
        };
        for x in draws {
            let d = x - center;
            m.n += 1;
            m.sum += d;
            m.sum_sq += d * d;
        }
        m
    }

    fn merge(parts: &[Moments]) -> Self {
        let center = parts.first().map_or(0.0, |p| p.center);
        parts.iter().fold(
            Moments {
                center,
                ..Moments::default()
            },
            |acc, p| Moments {
                n: acc.n + p.n,
                sum: acc.sum + p.sum,
                sum_sq: acc.sum_sq + p.sum_sq,
                center,
            },
        )
    }

    pub fn mean(&self) -> f64 {
        self.center + self.sum / self.n as f64
    }

    pub fn variance(&self) -> f64 {
        let n = self.n as f64;
        (self.sum_sq - self.sum * self.sum / n) / (n - 1.0)
    }
}

/// `draws` samples of one exact transition of length `t` from `x`.
pub fn exact_transition_moments(
    params: &OuParams<f64>,
    x: f64,
    t: f64,
    draws: usize,
    seed: u64,
    workers: usize,
) -> crate::Result<Moments> {
    let kernel = ExactTransition::new(params, t)?;
    let chunk = draws.div_ceil(MOMENT_CHUNKS);
    let parts = run_indexed(workers, MOMENT_CHUNKS, |c| {
        let mut s = RngStream::new(seed, streams::MOMENTS + c as u64);
        let n = chunk.min(draws.saturating_sub(c * chunk));
        Ok(Moments::from_draws(
            kernel.mean(x),
            (0..n).map(|_| kernel.step(x, &mut s)),
        ))
    })?;
    Ok(Moments::merge(&parts))
}

/// `draws` endpoints of `steps` iterations of the discrete recursion from `x`.
pub fn recursion_moments(
    params: &OuParams<f64>,
    x: f64,
    h: f64,
    steps: u64,
    draws: usize,
    seed: u64,
    workers: usize,
) -> crate::Result<Moments> {
    let chunk = draws.div_ceil(MOMENT_CHUNKS);
    let center = params.mean_y(steps, h, x)?;
    let parts = run_indexed(workers, MOMENT_CHUNKS, |c| {
        let mut s = RngStream::new(seed, streams::MOMENTS + (MOMENT_CHUNKS + c) as u64);
        let n = chunk.min(draws.saturating_sub(c * chunk));
        let mut ends = Vec::with_capacity(n);
        for _ in 0..n {
            let mut y = x;
            for _ in 0..steps {
                y = params.step_recursion(y, h, &mut s)?;
            }
            ends.push(y);
        }
        Ok(Moments::from_draws(center, ends.into_iter()))
    })?;
    Ok(Moments::merge(&parts))
}

fn moment_checks(prefix: &str, m: &Moments, mean: f64, var: f64) -> [Check; 2] {
    let n = m.n as f64;
    let mean_se = (var / n).sqrt();
    let var_se = var * (2.0 / (n - 1.0)).sqrt();
    [
        Check::new(
            &format!("{prefix}_mean"),
            (m.mean() - mean).abs() / mean_se,
            4.0,
            format!("sample {} vs {mean}; standard errors", m.mean()),
        ),
        Check::new(
            &format!("{prefix}_variance"),
            (m.variance() - var).abs() / var_se,
            4.0,
            format!("sample {} vs {var}; standard errors", m.variance()),
        ),
    ]
}

/// Largest `|½ψ'' + (a + bx)ψ' + 1|` over 10 interior points.
pub fn ode_residual(ctx: &FunctionalContext<f64>) -> crate::Result<f64> {
    let (a, b) = (ctx.params().a(), ctx.params().b());
    let h0 = 0.02 * ctx.width();
    let psi = |u: f64| ctx.psi(u).unwrap_or(f64::NAN);
    let mut worst = 0.0f64;
    for i in 1..=10 {
        let x = ctx.eta() + ctx.width() * i as f64 / 11.0;
        let d1 = central_diff(psi, x, h0)?.value;
        let d2 = central_second_diff(psi, x, h0)?.value;
        let r = (0.5 * d2 + (a + b * x) * d1 + 1.0).abs();
        worst = if r.is_nan() { f64::NAN } else { worst.max(r) };
    }
    Ok(worst)
}

/// `(rho check, psi check)` for a batch of first passages.
pub fn passage_checks(
    ctx: &FunctionalContext<f64>,
    x: f64,
    s: &PassageSummary,
) -> crate::Result<[Check; 2]> {
    let rho = ctx.rho(x)?;
    let psi = ctx.psi(x)?;
    let n = s.n_paths as f64;
    let rho_tol = 4.0 * (rho * (1.0 - rho) / n).sqrt() + 0.005;
    let psi_tol = (3.0 * s.time_std_error).max(0.02 * psi);
    Ok([
        Check::new(
            "rho_monte_carlo",
            (s.lower_fraction - rho).abs(),
            rho_tol,
            format!(
                "lower fraction {} vs rho {rho} over {} paths",
                s.lower_fraction, s.n_paths
            ),
        ),
        Check::new(
            "psi_monte_carlo",
            (s.mean_time - psi).abs(),
            psi_tol,
            format!(
                "mean exit time {} (se {}) vs psi {psi}",
                s.mean_time, s.time_std_error
            ),
        ),
    ])
}

pub fn run_checks(
    config: &RunConfig,
    paths: usize,
    variant: PsiVariant,
    workers: usize,
) -> Result<Vec<Check>, CliError> {
    let Model {
        params,
        corridor,
        ctx,
    } = build_model(config)?;
    let ctx = match variant {
        PsiVariant::Density => ctx,
        PsiVariant::Cdf => ctx.with_denominator(ExitTimeDenominator::Cdf),
    };
    let (eta, x0, theta) = (corridor.eta, corridor.x0, corridor.theta);
    let mut checks = Vec::new();

    let pinning = [
        (ctx.rho(eta)? - 1.0).abs(),
        ctx.rho(theta)?.abs(),
        ctx.psi(eta)?.abs(),
        ctx.psi(theta)?.abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    checks.push(Check::new(
        "boundary_values",
        pinning,
        1e-12,
        "rho(eta)=1, rho(theta)=0, psi=0 at both ends",
    ));
    let grid: Vec<f64> = (1..=50)
        .map(|i| eta + (theta - eta) * i as f64 / 51.0)
        .collect();
    let mut rhos = Vec::with_capacity(grid.len());
    for &x in &grid {
        rhos.push(ctx.rho(x)?);
    }
    let increases = rhos.windows(2).filter(|w| w[1] >= w[0]).count();
    checks.push(Check::new(
        "rho_decreasing",
        increases as f64,
        0.0,
        "non-decreasing steps on a 50-point interior grid",
    ));

    let exact = exact_transition_moments(&params, x0, 1.0, MOMENT_DRAWS, config.seed, workers)?;
    checks.extend(moment_checks(
        "exact_transition",
        &exact,
        params.mean_x(1.0, x0)?,
        params.var_x(1.0)?,
    ));
    let rec = recursion_moments(&params, x0, 0.1, 10, MOMENT_DRAWS, config.seed, workers)?;
    checks.extend(moment_checks(
        "recursion",
        &rec,
        params.mean_y(10, 0.1, x0)?,
        params.cov_y(10, 10, 0.1)?,
    ));

    let hi = 1e-3;
    let mut worst = 0.0f64;
    for y in [eta, x0, theta] {
        let (m1, m2) = params.one_step_moments(y, hi)?;
        worst = worst
            .max(((m1 - (params.a() + params.b() * y) * hi) / hi).abs())
            .max(((m2 - hi) / hi).abs());
    }
    checks.push(Check::new(
        "infinitesimal_moments",
        worst,
        0.05,
        "relative to h = 1e-3 at eta, x0, theta",
    ));

    let options = PassageOptions {
        bridge_correction: config.bridge_correction,
        ..PassageOptions::default()
    };
    let sampler = FirstPassageSampler::new(&corridor, config.h, &params, options)?;
    let outcomes = simulate_passages(&sampler, paths, config.seed, workers)?;
    checks.extend(passage_checks(
        &ctx,
        x0,
        &PassageSummary::from_outcomes(&outcomes),
    )?);

    checks.push(Check::new(
        "ode_residual",
        ode_residual(&ctx)?,
        1e-4,
        "max over 10 interior points",
    ));

    let policy = HarvestPolicy::level_difference(&corridor);
    let analytic = expected_ratio(&ctx, x0, &policy)?;
    let runs = simulate_replications(
        &corridor,
        &policy,
        config.horizon,
        config.h,
        &params,
        options,
        config.seed,
        config.replications,
        workers,
    )?
    .into_iter()
    .collect::<crate::Result<Vec<_>>>()?;
    let pooled = RenewalRunStats::pool(&runs)?;
    checks.push(match renewal_theorem_check(&pooled, analytic) {
        Ok(rc) => Check::new(
            "renewal_theorem",
            rc.z_score(),
            3.0,
            format!(
                "R(t)/t {} vs {} with standard error {} ({} cycles); standard errors",
                rc.time_average, rc.analytic_ratio, rc.standard_error, rc.n_cycles
            ),
        ),
        Err(e) => Check::new("renewal_theorem", f64::INFINITY, 3.0, e.to_string()),
    });

    let points = scan_grid(
        &[(params.a(), params.b())],
        &linspace(0.0, 6.0, 20),
        *ctx.quad(),
        workers,
    )?;
    let mut sign_failures = 0;
    let mut positivity_failures = 0;
    let mut derivative_failures = 0;
    let mut unmatched = 0;
    for p in &points {
        for v in [&p.lower, &p.upper] {
            if has_sign(v.surrogate_value) && !v.signs_agree {
                sign_failures += 1;
            }
            if !v.relative_gap.is_some_and(|g| g <= 1e-4) {
                unmatched += 1;
            }
        }
        if p.lower.in_positivity_region == Some(true)
            && !(p.lower.surrogate_value > 0.0 && p.lower.gamma_closed_form > 0.0)
        {
            positivity_failures += 1;
        }
        if !(p.lower.psi_prime_boundary > 0.0 && p.upper.psi_prime_boundary < 0.0) {
            derivative_failures += 1;
        }
    }
    let total = 2 * points.len();
    checks.push(Check::new(
        "sign_agreement",
        sign_failures as f64,
        0.0,
        format!("mismatches over {total} verdicts"),
    ));
    checks.push(Check::new(
        "gamma_routes_agree",
        unmatched as f64 / total as f64,
        0.05,
        "fraction of verdicts where closed-form and limit gamma differ by more than 1e-4 relative",
    ));
    checks.push(Check::new(
        "positivity_region",
        positivity_failures as f64,
        0.0,
        "points with eta >= -a/b and a non-positive lower limit",
    ));
    checks.push(Check::new(
        "boundary_derivative_signs",
        derivative_failures as f64,
        0.0,
        "psi'(eta) > 0 and psi'(theta) < 0",
    ));
    Ok(checks)
}

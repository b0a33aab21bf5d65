//! Boundary limits of the harvest ratio under the policy `Q(y) = y - x` and
//! their sign surrogates.
//!
//! Letting the regeneration level `x` approach a boundary turns `E[Q]/E[T]`
//! into `0/0`; the limit `gamma` is the ratio of one-sided derivatives. Its
//! sign equals the sign of a tangent-line comparison on `Φ(z(·))`:
//!
//! ```text
//! lower: S = Φ(z(η)) + β φ(z(η)) (θ - η) - Φ(z(θ))
//! upper: S = Φ(z(θ)) + β φ(z(θ)) (η - θ) - Φ(z(η))
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::FunctionalContext;
use crate::numerics::diff::{richardson, Extrapolated};
use crate::numerics::quadrature::QuadratureSpec;
use crate::numerics::rng::run_indexed;
use crate::numerics::special::std_normal_pdf;
use crate::ou_model::{Boundary, OuParams};
use crate::real::{lit, to_f64, Real};
use crate::renewal::{expected_reward, HarvestPolicy};

/// Surrogates smaller than this in magnitude carry no sign.
pub const SIGN_DEAD_BAND: f64 = 1e-9;

/// First offset of the limit sequence, as a fraction of the corridor width.
pub const LIMIT_FIRST_OFFSET: f64 = 1e-2;
pub const LIMIT_LEVELS: usize = 5;

/// A numerator limit below this fraction of the largest sampled numerator
/// counts as zero.
const VANISHING_NUMERATOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LimitCase {
    /// `x -> eta`
    #[serde(rename = "A_lower")]
    ALower,
    /// `x -> theta`
    #[serde(rename = "B_upper")]
    BUpper,
}

impl LimitCase {
    pub fn boundary(self) -> Boundary {
        match self {
            LimitCase::ALower => Boundary::Lower,
            LimitCase::BUpper => Boundary::Upper,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LimitCase::ALower => "A_lower",
            LimitCase::BUpper => "B_upper",
        }
    }
}

/// How the harvest is recomputed as the regeneration level moves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyRule<T> {
    /// `Q(y) = y - x` at each `x`.
    LevelDifference,
    Fixed(HarvestPolicy<T>),
}

impl<T: Real> PolicyRule<T> {
    fn at(&self, ctx: &FunctionalContext<T>, x: T) -> HarvestPolicy<T> {
        match self {
            PolicyRule::LevelDifference => HarvestPolicy::new(ctx.eta() - x, ctx.theta() - x),
            PolicyRule::Fixed(p) => *p,
        }
    }
}

/// Tangent to `Φ(z(·))` at `eta`, evaluated at `theta`, minus the curve there.
pub fn surrogate_a<T: Real>(ctx: &FunctionalContext<T>) -> T {
    let slope = ctx.beta() * std_normal_pdf(ctx.z(ctx.eta()));
    slope * ctx.width() - ctx.corridor_mass().value()
}

/// Tangent to `Φ(z(·))` at `theta`, evaluated at `eta`, minus the curve there.
pub fn surrogate_b<T: Real>(ctx: &FunctionalContext<T>) -> T {
    let slope = ctx.beta() * std_normal_pdf(ctx.z(ctx.theta()));
    ctx.corridor_mass().value() - slope * ctx.width()
}

/// The upper surrogate with its trailing term taken at `theta` instead of
/// `eta`. It reduces to `β φ(z(θ)) (η - θ) < 0` and is kept for comparison.
pub fn surrogate_b_collapsed<T: Real>(ctx: &FunctionalContext<T>) -> T {
    -ctx.beta() * std_normal_pdf(ctx.z(ctx.theta())) * ctx.width()
}

pub fn surrogate<T: Real>(ctx: &FunctionalContext<T>, case: LimitCase) -> T {
    match case {
        LimitCase::ALower => surrogate_a(ctx),
        LimitCase::BUpper => surrogate_b(ctx),
    }
}

/// Numerator of the closed-form limit; same sign as [`surrogate`].
pub fn gamma_numerator<T: Real>(ctx: &FunctionalContext<T>, case: LimitCase) -> Result<T> {
    let w = ctx.width();
    Ok(match case {
        LimitCase::ALower => -T::one() - w * ctx.rho_prime(ctx.eta())?,
        LimitCase::BUpper => T::one() + w * ctx.rho_prime(ctx.theta())?,
    })
}

/// `gamma` from the one-sided derivatives of `rho` and `psi` at the boundary.
/// The error and reliability flag come from the `psi` derivative.
pub fn gamma_closed_form<T: Real>(
    ctx: &FunctionalContext<T>,
    case: LimitCase,
) -> Result<Extrapolated<T>> {
    let num = gamma_numerator(ctx, case)?;
    let dpsi = ctx.psi_prime_at_boundary(case.boundary())?;
    let denom = match case {
        LimitCase::ALower => dpsi.value,
        LimitCase::BUpper => -dpsi.value,
    };
    let value = num / denom;
    Ok(Extrapolated {
        value,
        error: (value * dpsi.error / dpsi.value).abs(),
        reliable: dpsi.reliable && value.is_finite(),
    })
}

/// Offsets `width · 1e-2 · 2^-k` of the limit sequence.
pub fn limit_offsets<T: Real>(ctx: &FunctionalContext<T>) -> Vec<T> {
    (0..LIMIT_LEVELS)
        .map(|k| ctx.width() * lit(LIMIT_FIRST_OFFSET / 2f64.powi(k as i32)))
        .collect()
}

/// `lim E[Q]/E[T]` as the regeneration level approaches the boundary,
/// extrapolated from interior evaluations. A numerator that does not vanish
/// at the boundary makes the limit infinite, reported as
/// [`Error::DivergentLimit`].
pub fn ratio_limit<T: Real>(
    ctx: &FunctionalContext<T>,
    case: LimitCase,
    rule: PolicyRule<T>,
) -> Result<Extrapolated<T>> {
    let mut numerators = Vec::with_capacity(LIMIT_LEVELS);
    let mut ratios = Vec::with_capacity(LIMIT_LEVELS);
    for eps in limit_offsets(ctx) {
        let x = match case {
            LimitCase::ALower => ctx.eta() + eps,
            LimitCase::BUpper => ctx.theta() - eps,
        };
        let num = expected_reward(ctx, x, &rule.at(ctx, x))?;
        let psi = ctx.psi(x)?;
        if psi <= T::zero() {
            return Err(Error::Unreliable(format!(
                "expected exit time {psi} at x={x} is not positive"
            )));
        }
        numerators.push(num);
        ratios.push(num / psi);
    }
    let num_limit = richardson(&numerators, 1, 1).value;
    let scale = numerators.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    if num_limit.abs() > lit::<T>(VANISHING_NUMERATOR) * scale {
        return Err(Error::DivergentLimit {
            numerator_limit: to_f64(num_limit),
        });
    }
    Ok(richardson(&ratios, 1, 1))
}

/// [`ratio_limit`] for the policy `Q(y) = y - x`.
pub fn gamma_numeric_limit<T: Real>(
    ctx: &FunctionalContext<T>,
    case: LimitCase,
) -> Result<Extrapolated<T>> {
    ratio_limit(ctx, case, PolicyRule::LevelDifference)
}

pub fn has_sign(v: f64) -> bool {
    v.abs() >= SIGN_DEAD_BAND
}

/// Sign agreement between a surrogate and `gamma`; true inside the dead band.
pub fn signs_agree(surrogate: f64, gamma: f64) -> bool {
    !has_sign(surrogate) || (surrogate > 0.0) == (gamma > 0.0) && gamma != 0.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignVerdict {
    pub case: LimitCase,
    pub surrogate_value: f64,
    /// Upper case only: the surrogate with both `Φ` terms taken at `theta`.
    pub surrogate_collapsed: Option<f64>,
    /// `psi'` at the limiting boundary.
    pub psi_prime_boundary: f64,
    pub gamma_closed_form: f64,
    /// `None` when the extrapolated limit did not converge.
    pub gamma_numeric_limit: Option<f64>,
    /// `|numeric - closed| / |closed|`
    pub relative_gap: Option<f64>,
    pub signs_agree: bool,
    /// Lower case only: `eta >= -a/b`.
    pub in_positivity_region: Option<bool>,
    pub reliable: bool,
    pub note: Option<String>,
}

pub fn sign_verdict<T: Real>(ctx: &FunctionalContext<T>, case: LimitCase) -> Result<SignVerdict> {
    let s = to_f64(surrogate(ctx, case));
    let dpsi = ctx.psi_prime_at_boundary(case.boundary())?;
    let closed = gamma_closed_form(ctx, case)?;
    let closed_value = to_f64(closed.value);
    let (numeric, note) = match gamma_numeric_limit(ctx, case) {
        Ok(e) if e.reliable => (Some(to_f64(e.value)), None),
        Ok(e) => (
            None,
            Some(format!(
                "limit extrapolation did not settle (last correction {})",
                to_f64(e.error)
            )),
        ),
        Err(e) if e.is_numerical() => (None, Some(e.to_string())),
        Err(e) => return Err(e),
    };
    let relative_gap = numeric.map(|g| (g - closed_value).abs() / closed_value.abs());
    Ok(SignVerdict {
        case,
        surrogate_value: s,
        surrogate_collapsed: match case {
            LimitCase::ALower => None,
            LimitCase::BUpper => Some(to_f64(surrogate_b_collapsed(ctx))),
        },
        psi_prime_boundary: to_f64(dpsi.value),
        gamma_closed_form: closed_value,
        gamma_numeric_limit: numeric,
        relative_gap,
        signs_agree: signs_agree(s, closed_value),
        in_positivity_region: match case {
            LimitCase::ALower => Some(ctx.eta() >= ctx.params().drift_equilibrium()),
            LimitCase::BUpper => None,
        },
        reliable: closed.reliable && numeric.is_some(),
        note,
    })
}

/// Verdicts for both limits, lower first.
pub fn sign_report<T: Real>(ctx: &FunctionalContext<T>) -> Result<(SignVerdict, SignVerdict)> {
    Ok((
        sign_verdict(ctx, LimitCase::ALower)?,
        sign_verdict(ctx, LimitCase::BUpper)?,
    ))
}

/// Verdicts at one `(a, b, eta, theta)` grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridPoint {
    pub a: f64,
    pub b: f64,
    pub eta: f64,
    pub theta: f64,
    pub lower: SignVerdict,
    pub upper: SignVerdict,
}

/// `n` evenly spaced levels on `[lo, hi]`, both ends included.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Verdicts for every drift pair and every ordered pair `eta < theta` of
/// `levels`. Points come back in input order for any worker count.
pub fn scan_grid(
    drifts: &[(f64, f64)],
    levels: &[f64],
    quad: QuadratureSpec<f64>,
    workers: usize,
) -> Result<Vec<GridPoint>> {
    let mut jobs = Vec::new();
    for &(a, b) in drifts {
        for (i, &eta) in levels.iter().enumerate() {
            for &theta in &levels[i + 1..] {
                if eta < theta {
                    jobs.push((a, b, eta, theta));
                }
            }
        }
    }
    run_indexed(workers, jobs.len(), |k| {
        let (a, b, eta, theta) = jobs[k];
        let ctx = FunctionalContext::new(OuParams::with_any_drift(a, b)?, eta, theta, quad)?;
        let (lower, upper) = sign_report(&ctx)?;
        Ok(GridPoint {
            a,
            b,
            eta,
            theta,
            lower,
            upper,
        })
    })
}

//! The resource process `dX = (a + bX) dt + dB`, its discrete-time
//! counterpart `Y_nh = e^{bh} (Y_(n-1)h + W_nh)`, and first-passage sampling.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::numerics::rng::{next_gaussian, run_indexed, streams, RngStream};
use crate::real::{lit, to_f64, Real};

/// Drift intercept `a` and slope `b` of the resource process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuParams<T> {
    a: T,
    b: T,
}

impl<T: Real> OuParams<T> {
    /// Parameters in the consumption/productivity regime `a < 0 < b`.
    pub fn new(a: T, b: T) -> Result<Self> {
        ensure!(a.is_finite(), "a={a} must be finite");
        ensure!(
            a < T::zero(),
            "a={a} must be < 0 (pass allow_nonnegative_a to waive)"
        );
        Self::with_any_drift(a, b)
    }

    /// Same as [`OuParams::new`] without the sign restriction on `a`.
    pub fn with_any_drift(a: T, b: T) -> Result<Self> {
        ensure!(a.is_finite(), "a={a} must be finite");
        ensure!(
            b > T::zero() && b.is_finite(),
            "b={b} must be > 0 (beta = sqrt(2b) requires b > 0)"
        );
        Ok(OuParams { a, b })
    }

    pub fn a(&self) -> T {
        self.a
    }

    pub fn b(&self) -> T {
        self.b
    }

    /// Scale constants `(α, β) = (a·√2/√b, √(2b))`.
    pub fn alpha_beta(&self) -> (T, T) {
        let two = lit::<T>(2.0);
        (self.a * two.sqrt() / self.b.sqrt(), (two * self.b).sqrt())
    }

    /// Zero of the drift, `-a/b`.
    pub fn drift_equilibrium(&self) -> T {
        -self.a / self.b
    }

    /// `E[X(t) | X(0) = x]`.
    pub fn mean_x(&self, t: T, x: T) -> Result<T> {
        ensure!(t >= T::zero(), "t={t} must be >= 0");
        let bt = self.b * t;
        Ok(x * bt.exp() + self.a / self.b * bt.exp_m1())
    }

    /// `Cov[X(s), X(t)] = e^{b(t-s)} (e^{2bs} - 1) / (2b)` for `0 <= s <= t`.
    pub fn cov_x(&self, s: T, t: T) -> Result<T> {
        ensure!(s >= T::zero(), "s={s} must be >= 0");
        ensure!(s <= t, "s={s} must be <= t={t}");
        let two_b = self.b + self.b;
        Ok((self.b * (t - s)).exp() * (two_b * s).exp_m1() / two_b)
    }

    pub fn var_x(&self, t: T) -> Result<T> {
        self.cov_x(t, t)
    }

    /// `E[Y_nh] = x e^{nbh} + a h e^{bh} (1 - e^{nbh}) / (1 - e^{bh})`.
    pub fn mean_y(&self, n: u64, h: T, x: T) -> Result<T> {
        ensure!(h > T::zero(), "h={h} must be > 0");
        let bh = self.b * h;
        let nbh = bh * count::<T>(n);
        Ok(x * nbh.exp() + self.a * h * bh.exp() * nbh.exp_m1() / bh.exp_m1())
    }

    /// `Cov[Y_mh, Y_nh] = h e^{(2+n-m)bh} (1 - e^{2mbh}) / (1 - e^{2bh})` for `m <= n`.
    pub fn cov_y(&self, m: u64, n: u64, h: T) -> Result<T> {
        ensure!(h > T::zero(), "h={h} must be > 0");
        ensure!(m <= n, "m={m} must be <= n={n}");
        let bh = self.b * h;
        let lag = count::<T>(n - m);
        let two_bh = bh + bh;
        Ok(
            h * ((lit::<T>(2.0) + lag) * bh).exp() * (two_bh * count::<T>(m)).exp_m1()
                / two_bh.exp_m1(),
        )
    }

    /// Closed-form `(E[Y_h - y], E[(Y_h - y)²])` for one recursion step from `y`.
    pub fn one_step_moments(&self, y: T, h: T) -> Result<(T, T)> {
        ensure!(h > T::zero(), "h={h} must be > 0");
        let growth = (self.b * h).exp();
        let increment = growth * (y + self.a * h) - y;
        Ok((increment, growth * growth * h + increment * increment))
    }

    /// The recursion map `e^{bh} (y + w)` for a given consumption draw `w`.
    pub fn recursion_map(&self, y: T, h: T, w: T) -> T {
        (self.b * h).exp() * (y + w)
    }

    /// One step of the discrete recursion with `W ~ Normal(a h, h)`.
    pub fn step_recursion(&self, y: T, h: T, stream: &mut RngStream) -> Result<T> {
        ensure!(h > T::zero(), "h={h} must be > 0");
        let w = next_gaussian(stream, self.a * h, h)?;
        Ok(self.recursion_map(y, h, w))
    }

    /// One draw from the exact transition law of `X(t + h)` given `X(t) = y`.
    pub fn step_exact(&self, y: T, h: T, stream: &mut RngStream) -> Result<T> {
        Ok(ExactTransition::new(self, h)?.step(y, stream))
    }
}

#[inline]
fn count<T: Real>(n: u64) -> T {
    T::from_u64(n).expect("count representable")
}

/// Gaussian transition of the process over a fixed step `h`.
#[derive(Debug, Clone, Copy)]
pub struct ExactTransition<T> {
    pub decay: T,
    pub shift: T,
    pub variance: T,
    sd: T,
}

impl<T: Real> ExactTransition<T> {
    pub fn new(params: &OuParams<T>, h: T) -> Result<Self> {
        ensure!(h > T::zero() && h.is_finite(), "h={h} must be > 0");
        let bh = params.b * h;
        let variance = (bh + bh).exp_m1() / (params.b + params.b);
        Ok(ExactTransition {
            decay: bh.exp(),
            shift: params.a / params.b * bh.exp_m1(),
            variance,
            sd: variance.sqrt(),
        })
    }

    #[inline]
    pub fn mean(&self, y: T) -> T {
        self.decay * y + self.shift
    }

    #[inline]
    pub fn step(&self, y: T, stream: &mut RngStream) -> T {
        self.mean(y) + self.sd * stream.standard_normal::<T>()
    }
}

/// Lower boundary `eta`, regeneration level `x0`, upper boundary `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Corridor<T> {
    pub eta: T,
    pub x0: T,
    pub theta: T,
}

impl<T: Real> Corridor<T> {
    /// Strict corridor `0 <= eta < x0 < theta`.
    pub fn new(eta: T, x0: T, theta: T) -> Result<Self> {
        Self::check_bounds(eta, theta)?;
        ensure!(eta < x0, "eta={eta} must be < x0={x0}");
        ensure!(x0 < theta, "x0={x0} must be < theta={theta}");
        Ok(Corridor { eta, x0, theta })
    }

    /// Corridor whose start may sit on a boundary, for boundary-limit analysis.
    pub fn with_boundary_start(eta: T, x0: T, theta: T) -> Result<Self> {
        Self::check_bounds(eta, theta)?;
        ensure!(
            eta <= x0 && x0 <= theta,
            "x0={x0} must lie in [eta={eta}, theta={theta}]"
        );
        Ok(Corridor { eta, x0, theta })
    }

    fn check_bounds(eta: T, theta: T) -> Result<()> {
        ensure!(
            eta.is_finite() && theta.is_finite(),
            "eta={eta} and theta={theta} must be finite"
        );
        ensure!(eta >= T::zero(), "eta={eta} must be >= 0");
        ensure!(eta < theta, "eta={eta} must be < theta={theta}");
        Ok(())
    }

    pub fn width(&self) -> T {
        self.theta - self.eta
    }

    pub fn is_strict(&self) -> bool {
        self.eta < self.x0 && self.x0 < self.theta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Lower,
    Upper,
}

impl Boundary {
    pub fn as_str(&self) -> &'static str {
        match self {
            Boundary::Lower => "lower",
            Boundary::Upper => "upper",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FirstPassageOutcome<T> {
    pub boundary: Boundary,
    pub hit_time: T,
    pub steps: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassageOptions {
    /// Register within-step crossings with the Brownian-bridge probability.
    pub bridge_correction: bool,
    pub step_cap: u64,
}

impl Default for PassageOptions {
    fn default() -> Self {
        PassageOptions {
            bridge_correction: false,
            step_cap: 1_000_000_000,
        }
    }
}

/// Samples exit times from a strict corridor with exact transitions of step `h`.
///
/// Boundaries are checked at step ends; a reported hit time is `steps · h`.
#[derive(Debug, Clone)]
pub struct FirstPassageSampler<T> {
    corridor: Corridor<T>,
    h: T,
    kernel: ExactTransition<T>,
    options: PassageOptions,
}

impl<T: Real> FirstPassageSampler<T> {
    pub fn new(
        corridor: &Corridor<T>,
        h: T,
        params: &OuParams<T>,
        options: PassageOptions,
    ) -> Result<Self> {
        ensure!(
            corridor.is_strict(),
            "first passage needs eta={} < x0={} < theta={}",
            corridor.eta,
            corridor.x0,
            corridor.theta
        );
        ensure!(options.step_cap >= 1, "step_cap must be >= 1");
        Ok(FirstPassageSampler {
            corridor: *corridor,
            h,
            kernel: ExactTransition::new(params, h)?,
            options,
        })
    }

    pub fn step(&self) -> T {
        self.h
    }

    pub fn corridor(&self) -> &Corridor<T> {
        &self.corridor
    }

    pub fn sample(&self, stream: &mut RngStream) -> Result<FirstPassageOutcome<T>> {
        let Corridor { eta, x0, theta } = self.corridor;
        let two = lit::<T>(2.0);
        let mut y = x0;
        let mut steps = 0u64;
        while steps < self.options.step_cap {
            let next = self.kernel.step(y, stream);
            steps += 1;
            let hit = if next <= eta {
                Some(Boundary::Lower)
            } else if next >= theta {
                Some(Boundary::Upper)
            } else if self.options.bridge_correction {
                let v = self.kernel.variance;
                let p_lower = (-two * (y - eta) * (next - eta) / v).exp();
                let p_upper = (-two * (theta - y) * (theta - next) / v).exp();
                let u = stream.open01::<T>();
                if u < p_lower {
                    Some(Boundary::Lower)
                } else if u < p_lower + p_upper {
                    Some(Boundary::Upper)
                } else {
                    None
                }
            } else {
                None
            };
            if let Some(boundary) = hit {
                return Ok(FirstPassageOutcome {
                    boundary,
                    hit_time: count::<T>(steps) * self.h,
                    steps,
                });
            }
            y = next;
        }
        Err(Error::StepCapExceeded {
            cap: self.options.step_cap,
            state: to_f64(y),
            eta: to_f64(eta),
            theta: to_f64(theta),
        })
    }
}

/// Runs one first passage from the corridor's start level.
pub fn first_passage<T: Real>(
    corridor: &Corridor<T>,
    h: T,
    params: &OuParams<T>,
    stream: &mut RngStream,
    options: PassageOptions,
) -> Result<FirstPassageOutcome<T>> {
    FirstPassageSampler::new(corridor, h, params, options)?.sample(stream)
}

/// Independent first passages; path `i` uses its own stream, so the result
/// is identical for any worker count.
pub fn simulate_passages<T: Real>(
    sampler: &FirstPassageSampler<T>,
    n_paths: usize,
    seed: u64,
    workers: usize,
) -> Result<Vec<FirstPassageOutcome<T>>> {
    run_indexed(workers, n_paths, |i| {
        let mut stream = RngStream::new(seed, streams::FIRST_PASSAGE + i as u64);
        sampler.sample(&mut stream)
    })
}

/// Aggregate of a batch of first passages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PassageSummary {
    pub n_paths: usize,
    pub lower_fraction: f64,
    pub upper_fraction: f64,
    pub mean_time: f64,
    pub time_std_error: f64,
}

impl PassageSummary {
    pub fn from_outcomes<T: Real>(outcomes: &[FirstPassageOutcome<T>]) -> Self {
        let n = outcomes.len();
        let nf = n as f64;
        let lower = outcomes
            .iter()
            .filter(|o| o.boundary == Boundary::Lower)
            .count();
        let times: Vec<f64> = outcomes.iter().map(|o| to_f64(o.hit_time)).collect();
        let mean = times.iter().sum::<f64>() / nf;
        let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (nf - 1.0).max(1.0);
        PassageSummary {
            n_paths: n,
            lower_fraction: lower as f64 / nf,
            upper_fraction: (n - lower) as f64 / nf,
            mean_time: mean,
            time_std_error: (var / nf).sqrt(),
        }
    }
}

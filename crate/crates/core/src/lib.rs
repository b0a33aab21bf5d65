//! Evaluation of two-boundary harvesting policies on an Ornstein-Uhlenbeck
//! resource process `dX = (a + bX) dt + dB`.
//!
//! ```
//! use ou_harvest::renewal::expected_ratio;
//! use ou_harvest::{Corridor, FunctionalContext, HarvestPolicy, OuParams, QuadratureSpec};
//!
//! let params = OuParams::<f64>::new(-1.0, 0.5)?;
//! let corridor = Corridor::new(1.0, 1.5, 3.0)?;
//! let ctx = FunctionalContext::new(params, corridor.eta, corridor.theta, QuadratureSpec::default())?;
//! let policy = HarvestPolicy::level_difference(&corridor);
//! let ratio = expected_ratio(&ctx, corridor.x0, &policy)?;
//! assert!((ratio + 0.0992851086960410).abs() < 1e-12);
//! # Ok::<(), ou_harvest::Error>(())
//! ```

// Reference constants keep their published digits.
#![allow(clippy::excessive_precision)]

pub mod cli;
pub mod error;
pub mod functionals;
pub mod numerics;
pub mod ou_model;
pub mod real;
pub mod renewal;
pub mod sign_analysis;

pub use error::{Error, Result};
pub use real::Real;

pub use functionals::{ExitTimeDenominator, FunctionalContext};
pub use numerics::quadrature::QuadratureSpec;
pub use numerics::rng::RngStream;
pub use ou_model::{
    Boundary, Corridor, FirstPassageOutcome, FirstPassageSampler, OuParams, PassageOptions,
};
pub use renewal::{HarvestPolicy, RenewalCheck, RenewalRunStats};
pub use sign_analysis::{LimitCase, SignVerdict};

/// Double-precision instantiations.
pub type OuParamsF64 = OuParams<f64>;
pub type CorridorF64 = Corridor<f64>;
pub type FunctionalContextF64 = FunctionalContext<f64>;
pub type HarvestPolicyF64 = HarvestPolicy<f64>;
pub type RenewalRunStatsF64 = RenewalRunStats<f64>;

/// Single-precision instantiations.
pub type OuParamsF32 = OuParams<f32>;
pub type CorridorF32 = Corridor<f32>;
pub type FunctionalContextF32 = FunctionalContext<f32>;

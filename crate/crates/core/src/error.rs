use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quadrature did not reach tolerance {tol:e} on [{lo}, {hi}] within depth {max_depth}")]
    QuadratureNonConvergence {
        lo: f64,
        hi: f64,
        tol: f64,
        max_depth: u32,
    },

    #[error("first-passage simulation exceeded step cap {cap} (state {state}, corridor ({eta}, {theta}))")]
    StepCapExceeded {
        cap: u64,
        state: f64,
        eta: f64,
        theta: f64,
    },

    #[error("extrapolation did not converge: {0}")]
    Unreliable(String),

    #[error("boundary limit diverges: numerator tends to {numerator_limit} while the expected exit time vanishes")]
    DivergentLimit { numerator_limit: f64 },

    #[error("insufficient cycles: {n} completed, at least {required} required")]
    InsufficientCycles { n: usize, required: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// True for failures caused by numerical methods rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::QuadratureNonConvergence { .. }
                | Error::StepCapExceeded { .. }
                | Error::Unreliable(_)
                | Error::DivergentLimit { .. }
        )
    }
}

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err($crate::error::Error::InvalidParameter(format!($($fmt)+)));
        }
    };
}

pub(crate) use ensure;

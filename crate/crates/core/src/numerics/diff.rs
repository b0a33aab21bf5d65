use serde::Serialize;

use crate::error::{ensure, Result};
use crate::real::{lit, Real};

/// Number of step halvings used by the difference helpers.
pub const DIFF_LEVELS: usize = 4;

/// Result of a Richardson extrapolation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extrapolated<T> {
    pub value: T,
    /// Change between the last two diagonal entries of the tableau.
    pub error: T,
    /// False when the last correction grew relative to the one before it
    /// and is not yet at rounding level.
    pub reliable: bool,
}

/// Extrapolates `values[k]`, taken at step `h0 / 2^k`, to zero step.
///
/// The error of each raw value is assumed to expand in powers
/// `first_order, first_order + order_step, ...` of the step.
pub fn richardson<T: Real>(values: &[T], first_order: u32, order_step: u32) -> Extrapolated<T> {
    assert!(!values.is_empty(), "richardson needs at least one value");
    let n = values.len();
    let mut prev_row: Vec<T> = vec![values[0]];
    let mut diagonal = vec![values[0]];
    for (k, &v) in values.iter().enumerate().skip(1) {
        let mut row = Vec::with_capacity(k + 1);
        row.push(v);
        for j in 1..=k {
            let order = first_order + (j as u32 - 1) * order_step;
            let factor = lit::<T>(2f64.powi(order as i32) - 1.0);
            let next = row[j - 1] + (row[j - 1] - prev_row[j - 1]) / factor;
            row.push(next);
        }
        diagonal.push(row[k]);
        prev_row = row;
    }
    let value = diagonal[n - 1];
    if n == 1 {
        return Extrapolated {
            value,
            error: T::zero(),
            reliable: true,
        };
    }
    let error = (diagonal[n - 1] - diagonal[n - 2]).abs();
    let prev_error = if n >= 3 {
        (diagonal[n - 2] - diagonal[n - 3]).abs()
    } else {
        error
    };
    let noise = T::epsilon().sqrt() * value.abs();
    Extrapolated {
        value,
        error,
        reliable: value.is_finite() && (error <= prev_error || error <= noise),
    }
}

fn halving_steps<T: Real>(h0: T) -> impl Iterator<Item = T> {
    (0..DIFF_LEVELS).map(move |k| h0 / lit(2f64.powi(k as i32)))
}

/// Richardson-extrapolated central difference `f'(x)`; error `O(h0⁸)` for smooth `f`.
pub fn central_diff<T, F>(f: F, x: T, h0: T) -> Result<Extrapolated<T>>
where
    T: Real,
    F: Fn(T) -> T,
{
    ensure!(h0 > T::zero(), "step h0={h0} must be > 0");
    let raw: Vec<T> = halving_steps(h0)
        .map(|h| (f(x + h) - f(x - h)) / (h + h))
        .collect();
    Ok(richardson(&raw, 2, 2))
}

/// Richardson-extrapolated second central difference `f''(x)`.
pub fn central_second_diff<T, F>(f: F, x: T, h0: T) -> Result<Extrapolated<T>>
where
    T: Real,
    F: Fn(T) -> T,
{
    ensure!(h0 > T::zero(), "step h0={h0} must be > 0");
    let fx = f(x);
    let raw: Vec<T> = halving_steps(h0)
        .map(|h| (f(x + h) - (fx + fx) + f(x - h)) / (h * h))
        .collect();
    Ok(richardson(&raw, 2, 2))
}

/// One-sided derivative at `x`, sampling only on the side given by the sign
/// of `h0` (positive: `[x, x + h0]`, negative: `[x + h0, x]`).
pub fn one_sided_diff<T, F>(f: F, x: T, h0: T) -> Result<Extrapolated<T>>
where
    T: Real,
    F: Fn(T) -> T,
{
    ensure!(
        h0 != T::zero() && h0.is_finite(),
        "step h0={h0} must be nonzero"
    );
    let fx = f(x);
    let raw: Vec<T> = halving_steps(h0).map(|h| (f(x + h) - fx) / h).collect();
    Ok(richardson(&raw, 1, 1))
}

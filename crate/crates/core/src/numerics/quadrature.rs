use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::real::{lit, to_f64, Real};

/// Tolerance and refinement cap for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec<T> {
    pub abs_tol: T,
    pub max_depth: u32,
}

impl<T: Real> QuadratureSpec<T> {
    pub fn new(abs_tol: T, max_depth: u32) -> Result<Self> {
        ensure!(
            abs_tol > T::zero() && abs_tol.is_finite(),
            "abs_tol={abs_tol} must be > 0"
        );
        ensure!(max_depth >= 1, "max_depth={max_depth} must be >= 1");
        Ok(QuadratureSpec { abs_tol, max_depth })
    }
}

impl<T: Real> Default for QuadratureSpec<T> {
    /// `abs_tol = 1e-10`, raised to `100·ε` for scalars too coarse to reach it.
    fn default() -> Self {
        QuadratureSpec {
            abs_tol: lit::<T>(1e-10).max(T::epsilon() * lit(100.0)),
            max_depth: 40,
        }
    }
}

// Gauss-Kronrod 7/15 nodes on [-1, 1]; odd indices are the Gauss nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

struct Panel<T> {
    kronrod: T,
    error: T,
    abs_mass: T,
}

fn gk15<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T) -> Panel<T> {
    let half = lit::<T>(0.5);
    let center = half * (a + b);
    let half_len = half * (b - a);
    let fc = f(center);
    let mut kronrod = fc * lit(WGK[7]);
    let mut gauss = fc * lit(WG[3]);
    let mut abs_mass = fc.abs() * lit(WGK[7]);
    for j in 0..7 {
        let dx = half_len * lit(XGK[j]);
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        kronrod = kronrod + lit::<T>(WGK[j]) * (f1 + f2);
        abs_mass = abs_mass + lit::<T>(WGK[j]) * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss = gauss + lit::<T>(WG[j / 2]) * (f1 + f2);
        }
    }
    let scale = half_len.abs();
    Panel {
        kronrod: kronrod * half_len,
        error: ((kronrod - gauss) * half_len).abs(),
        abs_mass: abs_mass * scale,
    }
}

/// Adaptive Gauss-Kronrod quadrature of `f` over `[lo, hi]`.
///
/// Panels are bisected until the Kronrod/Gauss discrepancy falls below the
/// panel's share of `spec.abs_tol`, or below the rounding floor of the panel
/// sum. Exceeding `spec.max_depth` bisections on any branch is an error.
pub fn integrate<T, F>(f: F, lo: T, hi: T, spec: &QuadratureSpec<T>) -> Result<T>
where
    T: Real,
    F: Fn(T) -> T,
{
    ensure!(lo <= hi, "integration bounds lo={lo} must be <= hi={hi}");
    if lo == hi {
        return Ok(T::zero());
    }
    let width = hi - lo;
    let roundoff = lit::<T>(50.0) * T::epsilon();
    let mut total = T::zero();
    let mut stack = vec![(lo, hi, 0u32)];
    while let Some((a, b, depth)) = stack.pop() {
        let panel = gk15(&f, a, b);
        let budget = spec.abs_tol * (b - a) / width;
        if !panel.kronrod.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "integrand is not finite on [{a}, {b}]"
            )));
        }
        if panel.error <= budget.max(roundoff * panel.abs_mass) {
            total = total + panel.kronrod;
            continue;
        }
        if depth >= spec.max_depth {
            return Err(Error::QuadratureNonConvergence {
                lo: to_f64(lo),
                hi: to_f64(hi),
                tol: to_f64(spec.abs_tol),
                max_depth: spec.max_depth,
            });
        }
        let mid = lit::<T>(0.5) * (a + b);
        stack.push((mid, b, depth + 1));
        stack.push((a, mid, depth + 1));
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::special::{std_normal_cdf, std_normal_pdf};
    use proptest::prelude::*;

    #[test]
    fn constant_and_degenerate() {
        let spec: QuadratureSpec<f64> = QuadratureSpec::default();
        assert!((integrate(|_| 1.0, 0.0, 2.0, &spec).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(integrate(|x: f64| x.exp(), 5.0, 5.0, &spec).unwrap(), 0.0);
    }

    #[test]
    fn total_probability() {
        let spec: QuadratureSpec<f64> = QuadratureSpec::default();
        let mass = integrate(std_normal_pdf, -12.0, 12.0, &spec).unwrap();
        assert!((mass - 1.0).abs() < spec.abs_tol);
        let partial = integrate(std_normal_pdf, -1.0, 2.5, &spec).unwrap();
        let by_cdf = std_normal_cdf(2.5) - std_normal_cdf(-1.0);
        assert!((partial - by_cdf).abs() < spec.abs_tol);
    }

    #[test]
    fn rejects_reversed_bounds_and_reports_non_convergence() {
        let spec: QuadratureSpec<f64> = QuadratureSpec::default();
        assert!(integrate(|x: f64| x, 1.0, 0.0, &spec).is_err());
        let tight = QuadratureSpec::new(1e-10, 2).unwrap();
        let err = integrate(|x: f64| (1.0 / x).sin(), 1e-3, 1.0, &tight).unwrap_err();
        assert!(matches!(err, Error::QuadratureNonConvergence { .. }));
    }

    #[test]
    fn spec_validation() {
        assert!(QuadratureSpec::new(0.0, 10).is_err());
        assert!(QuadratureSpec::new(1e-8, 0).is_err());
        let single: QuadratureSpec<f32> = QuadratureSpec::default();
        assert!(single.abs_tol > 1e-6);
    }

    proptest! {
        #[test]
        fn additivity(a in -5.0f64..5.0, w1 in 0.0f64..4.0, w2 in 0.0f64..4.0) {
            let spec: QuadratureSpec<f64> = QuadratureSpec::default();
            let f = |x: f64| (x * 0.7).sin() + std_normal_pdf(x) * x * x;
            let (b, c) = (a + w1, a + w1 + w2);
            let whole = integrate(f, a, c, &spec).unwrap();
            let split = integrate(f, a, b, &spec).unwrap() + integrate(f, b, c, &spec).unwrap();
            prop_assert!((whole - split).abs() <= 2.0 * spec.abs_tol);
        }
    }
}

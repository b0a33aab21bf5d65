//! Error-function family and the standard normal distribution.
//!
//! `erf` and `erfc` follow the FreeBSD `s_erf.c` rational approximations
//! (Sun Microsystems, 1993; freely redistributable with this notice). The
//! scaled complementary function `erfcx(x) = exp(x²)·erfc(x)` reuses the same
//! tail fits without the `exp(-x²)` factor, so upper-tail masses stay
//! representable far past the point where `erfc` underflows.

use crate::real::{lit, Real};

const ERX: f64 = 8.45062911510467529297e-01;
const EFX: f64 = 1.28379167095512586316e-01;

// erf on [0, 0.84375]
const PP: [f64; 5] = [
    1.28379167095512558561e-01,
    -3.25042107247001499370e-01,
    -2.84817495755985104766e-02,
    -5.77027029648944159157e-03,
    -2.37630166566501626084e-05,
];
const QQ: [f64; 6] = [
    1.0,
    3.97917223959155352819e-01,
    6.50222499887672944485e-02,
    5.08130628187576562776e-03,
    1.32494738004321644526e-04,
    -3.96022827877536812320e-06,
];

// erf on [0.84375, 1.25]
const PA: [f64; 7] = [
    -2.36211856075265944077e-03,
    4.14856118683748331666e-01,
    -3.72207876035701323847e-01,
    3.18346619901161753674e-01,
    -1.10894694282396677476e-01,
    3.54783043256182359371e-02,
    -2.16637559486879084300e-03,
];
const QA: [f64; 7] = [
    1.0,
    1.06420880400844228286e-01,
    5.40397917702171048937e-01,
    7.18286544141962662868e-02,
    1.26171219808761642112e-01,
    1.36370839120290507362e-02,
    1.19844998467991074170e-02,
];

// erfc on [1.25, 1/0.35]
const RA: [f64; 8] = [
    -9.86494403484714822705e-03,
    -6.93858572707181764372e-01,
    -1.05586262253232909814e+01,
    -6.23753324503260060396e+01,
    -1.62396669462573470355e+02,
    -1.84605092906711035994e+02,
    -8.12874355063065934246e+01,
    -9.81432934416914548592e+00,
];
const SA: [f64; 9] = [
    1.0,
    1.96512716674392571292e+01,
    1.37657754143519042600e+02,
    4.34565877475229228821e+02,
    6.45387271733267880336e+02,
    4.29008140027567833386e+02,
    1.08635005541779435134e+02,
    6.57024977031928170135e+00,
    -6.04244152148580987438e-02,
];

// erfc on [1/0.35, 28]
const RB: [f64; 7] = [
    -9.86494292470009928597e-03,
    -7.99283237680523006574e-01,
    -1.77579549177547519889e+01,
    -1.60636384855821916062e+02,
    -6.37566443368389627722e+02,
    -1.02509513161107724954e+03,
    -4.83519191608651397019e+02,
];
const SB: [f64; 8] = [
    1.0,
    3.03380607434824582924e+01,
    3.25792512996573918826e+02,
    1.53672958608443695994e+03,
    3.19985821950859553908e+03,
    2.55305040643316442583e+03,
    4.74528541206955367215e+02,
    -2.24409524465858183362e+01,
];

#[inline]
fn horner<T: Real>(x: T, coeffs: &[f64]) -> T {
    coeffs
        .iter()
        .rev()
        .fold(T::zero(), |acc, &c| acc * x + lit::<T>(c))
}

/// `(erf(x) - x) / x` on |x| < 0.84375.
#[inline]
fn small_ratio<T: Real>(x: T) -> T {
    let z = x * x;
    horner(z, &PP) / horner(z, &QQ)
}

/// `erf(1 + s) - ERX` for |x| in [0.84375, 1.25].
#[inline]
fn near_one<T: Real>(ax: T) -> T {
    let s = ax - T::one();
    horner(s, &PA) / horner(s, &QA)
}

/// `ln(x·erfc(x)) + x² + 0.5625`, fitted for x ≥ 1.25.
#[inline]
fn tail_log<T: Real>(ax: T) -> T {
    let s = T::one() / (ax * ax);
    if ax < lit(1.0 / 0.35) {
        horner(s, &RA) / horner(s, &SA)
    } else {
        horner(s, &RB) / horner(s, &SB)
    }
}

/// `exp(-x²)` with the rounding error of `x²` compensated.
#[inline]
fn exp_neg_sq<T: Real>(x: T) -> T {
    let hi = x * x;
    let lo = x.mul_add(x, -hi);
    (-hi).exp() * (-lo).exp()
}

#[inline]
fn exp_sq<T: Real>(x: T) -> T {
    let hi = x * x;
    let lo = x.mul_add(x, -hi);
    hi.exp() * lo.exp()
}

/// Error function.
pub fn erf<T: Real>(x: T) -> T {
    if x.is_nan() {
        return x;
    }
    let ax = x.abs();
    let magnitude = if ax < lit(0.84375) {
        if ax < lit(3.725_290_298_461_914e-9) {
            ax + lit::<T>(EFX) * ax
        } else {
            ax + ax * small_ratio(ax)
        }
    } else if ax < lit(1.25) {
        lit::<T>(ERX) + near_one(ax)
    } else if ax >= lit(6.0) {
        T::one()
    } else {
        T::one() - erfc_positive(ax)
    };
    if x < T::zero() {
        -magnitude
    } else {
        magnitude
    }
}

/// erfc for x ≥ 0.
fn erfc_positive<T: Real>(x: T) -> T {
    if x < lit(0.25) {
        T::one() - (x + x * small_ratio(x))
    } else if x < lit(0.84375) {
        lit::<T>(0.5) - (x * small_ratio(x) + (x - lit(0.5)))
    } else if x < lit(1.25) {
        lit::<T>(1.0 - ERX) - near_one(x)
    } else if x < lit(28.0) {
        exp_neg_sq(x) * (lit::<T>(-0.5625) + tail_log(x)).exp() / x
    } else {
        exp_neg_sq(x) * erfcx_asymptotic(x)
    }
}

/// Complementary error function `1 - erf(x)`, accurate in the upper tail.
pub fn erfc<T: Real>(x: T) -> T {
    if x.is_nan() {
        return x;
    }
    if x >= T::zero() {
        erfc_positive(x)
    } else {
        lit::<T>(2.0) - erfc_positive(-x)
    }
}

/// Continued asymptotic series for x ≥ 28; eight terms reach full double precision.
fn erfcx_asymptotic<T: Real>(x: T) -> T {
    let inv = T::one() / (lit::<T>(2.0) * x * x);
    let mut term = T::one();
    let mut sum = T::one();
    for k in 1..8 {
        term = -term * lit::<T>((2 * k - 1) as f64) * inv;
        sum = sum + term;
    }
    sum / (x * T::PI().sqrt())
}

/// Scaled complementary error function `exp(x²)·erfc(x)`.
pub fn erfcx<T: Real>(x: T) -> T {
    if x.is_nan() {
        return x;
    }
    if x < T::zero() {
        return lit::<T>(2.0) * exp_sq(x) - erfcx(-x);
    }
    if x < lit(1.25) {
        erfc_positive(x) * (x * x).exp()
    } else if x < lit(28.0) {
        (lit::<T>(-0.5625) + tail_log(x)).exp() / x
    } else if x.is_infinite() {
        T::zero()
    } else {
        erfcx_asymptotic(x)
    }
}

/// Standard normal density φ(z).
#[inline]
pub fn std_normal_pdf<T: Real>(z: T) -> T {
    let h = z * T::FRAC_1_SQRT_2();
    exp_neg_sq(h) * lit::<T>(0.398_942_280_401_432_7)
}

/// Natural log of φ(z).
#[inline]
pub fn ln_std_normal_pdf<T: Real>(z: T) -> T {
    lit::<T>(-0.918_938_533_204_672_7) - lit::<T>(0.5) * z * z
}

/// Standard normal distribution function Φ(z).
#[inline]
pub fn std_normal_cdf<T: Real>(z: T) -> T {
    lit::<T>(0.5) * erfc(-z * T::FRAC_1_SQRT_2())
}

/// Upper tail `1 - Φ(z)`, computed without cancellation.
#[inline]
pub fn std_normal_sf<T: Real>(z: T) -> T {
    lit::<T>(0.5) * erfc(z * T::FRAC_1_SQRT_2())
}

/// Normal probability mass `Φ(hi) - Φ(lo)` held as `weight · φ(anchor)`.
///
/// Keeping the Gaussian factor symbolic lets ratios of masses and masses
/// divided by a density be formed without underflow, whichever tail the
/// interval sits in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussMass<T> {
    pub weight: T,
    pub anchor: T,
}

impl<T: Real> GaussMass<T> {
    /// Mass of the standard normal on `[lo, hi]`. Requires `lo <= hi`.
    pub fn between(lo: T, hi: T) -> Self {
        debug_assert!(lo <= hi, "GaussMass::between requires lo <= hi");
        if lo >= T::zero() {
            Self::upper_tail(lo, hi)
        } else if hi <= T::zero() {
            Self::upper_tail(-hi, -lo)
        } else {
            let s = T::FRAC_1_SQRT_2();
            let half_diff = lit::<T>(0.5) * (erf(hi * s) - erf(lo * s));
            GaussMass {
                weight: half_diff * lit::<T>(2.506_628_274_631_000_5),
                anchor: T::zero(),
            }
        }
    }

    // 0 <= lo <= hi
    fn upper_tail(lo: T, hi: T) -> Self {
        let s = T::FRAC_1_SQRT_2();
        let (l, h) = (lo * s, hi * s);
        let far = if hi.is_infinite() {
            T::zero()
        } else {
            erfcx(h) * (-(h - l) * (h + l)).exp()
        };
        GaussMass {
            weight: (erfcx(l) - far) * lit::<T>(1.253_314_137_315_500_3),
            anchor: lo,
        }
    }

    pub fn value(&self) -> T {
        self.weight * std_normal_pdf(self.anchor)
    }

    pub fn ln(&self) -> T {
        self.weight.ln() + ln_std_normal_pdf(self.anchor)
    }

    /// `(Φ(hi) - Φ(lo)) / φ(at)`.
    pub fn over_pdf(&self, at: T) -> T {
        self.weight * (lit::<T>(0.5) * (at - self.anchor) * (at + self.anchor)).exp()
    }

    /// `self / other` as a plain ratio of masses.
    pub fn ratio(&self, other: &Self) -> T {
        let shift = lit::<T>(0.5) * (other.anchor - self.anchor) * (other.anchor + self.anchor);
        self.weight / other.weight * shift.exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // 40-digit reference values of Φ.
    const PHI_TABLE: [(f64, f64); 12] = [
        (-8.0, 6.220960574271784123515995e-16),
        (-5.0, 2.866515718791939116737523e-7),
        (-2.5, 0.006209665325776135166978105),
        (-1.0, 0.1586552539314570514147675),
        (-0.3, 0.382088577811047362693471),
        (0.0, 0.5),
        (0.5, 0.6914624612740131036377046),
        (1.0, 0.8413447460685429485852325),
        (2.0, 0.9772498680518207927997174),
        (3.7, 0.9998922002665226116630625),
        (6.0, 0.9999999990134123549623019),
        (8.0, 0.9999999999999993779039426),
    ];

    fn trapezoid_cdf(z: f64) -> f64 {
        let step = 1e-5;
        let n = ((z + 12.0) / step).round() as usize;
        let h = (z + 12.0) / n as f64;
        let f = |u: f64| (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut sum = 0.5 * (f(-12.0) + f(z));
        for i in 1..n {
            sum += f(-12.0 + i as f64 * h);
        }
        sum * h
    }

    #[test]
    fn pdf_values() {
        assert_eq!(std_normal_pdf(0.0f64), 0.3989422804014327);
        assert_eq!(std_normal_pdf(3.0f64), std_normal_pdf(-3.0f64));
        let expected = 0.2419707245191433497978302;
        assert!((std_normal_pdf(1.0f64) - expected).abs() < 1e-16);
    }

    #[test]
    fn cdf_matches_reference_table() {
        for (z, want) in PHI_TABLE {
            let got = std_normal_cdf(z);
            let rel = ((got - want) / want).abs();
            assert!(
                rel <= 1e-14,
                "Phi({z}) = {got:e}, want {want:e}, rel {rel:e}"
            );
        }
        assert_eq!(std_normal_cdf(0.0f64), 0.5);
    }

    #[test]
    fn cdf_matches_trapezoid_oracle() {
        let oracle = trapezoid_cdf(1.0);
        assert!((std_normal_cdf(1.0f64) - oracle).abs() < 1e-9);
    }

    #[test]
    fn cdf_symmetry_and_monotone() {
        for i in 0..=1600 {
            let z = -8.0 + i as f64 * 0.01;
            assert!((std_normal_cdf(z) + std_normal_cdf(-z) - 1.0).abs() < 4.5e-16);
        }
        // Near z = 8 neighbouring doubles below 1 are 1.1e-16 apart, so the
        // strict check uses a grid coarse enough to resolve them.
        let mut prev = 0.0f64;
        for i in 0..=64 {
            let z = -8.0 + i as f64 * 0.25;
            let p = std_normal_cdf(z);
            assert!(p > prev, "not increasing at {z}");
            prev = p;
        }
    }

    #[test]
    fn erfcx_matches_reference_across_branches() {
        let table: [(f64, f64); 10] = [
            (0.3, 0.7345993345676551422857),
            (0.84375, 0.4743680720269092679521),
            (1.25, 0.367822916452361092926),
            (2.0, 0.2553956763105057438651),
            (2.857142857142857, 0.1871063767114707034615),
            (5.0, 0.1107046377330686263702),
            (27.9, 0.02020888462128261562743),
            (28.0, 0.02013680196421427677651),
            (40.0, 0.01410033598337781362474),
            (-1.5, 18.65388625626273393875),
        ];
        for (x, want) in table {
            let rel = ((erfcx(x) - want) / want).abs();
            assert!(rel < 1e-14, "erfcx({x}) rel err {rel:e}");
        }
        let x = 1e6f64;
        assert!((erfcx(x) * x * std::f64::consts::PI.sqrt() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gauss_mass_matches_cdf_difference() {
        let cases: [(f64, f64); 5] = [
            (-1.0, 1.0),
            (-3.0, -0.5),
            (0.2, 2.0),
            (1.0, 1.5),
            (-8.0, 8.0),
        ];
        for (lo, hi) in cases {
            let m = GaussMass::between(lo, hi);
            let direct = std_normal_cdf(hi) - std_normal_cdf(lo);
            assert!(
                ((m.value() - direct) / direct).abs() < 1e-13,
                "[{lo}, {hi}]"
            );
            assert!((m.ln() - direct.ln()).abs() < 1e-13);
        }
    }

    #[test]
    fn gauss_mass_survives_deep_tails() {
        // Φc(40) ≈ 3.7e-350 underflows, but the density ratio is O(1/40).
        let m = GaussMass::between(40.0f64, f64::INFINITY);
        let mills = m.over_pdf(40.0);
        assert!((mills * 40.0 - 1.0).abs() < 1e-3);
        let left = GaussMass::between(-60.0f64, -50.0);
        assert!((left.over_pdf(-50.0) * 50.0 - 1.0).abs() < 1e-3);
        let r = GaussMass::between(40.0f64, 41.0).ratio(&GaussMass::between(40.0, 42.0));
        assert!(r > 0.0 && r <= 1.0);
    }

    #[test]
    fn single_precision_tracks_double() {
        for i in -40..=40 {
            let z = i as f64 * 0.2;
            let d = std_normal_cdf(z);
            let s = std_normal_cdf(z as f32) as f64;
            assert!((d - s).abs() < 1e-6, "z={z}");
        }
    }
}

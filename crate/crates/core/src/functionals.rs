//! Closed-form exit functionals of the resource process on a corridor
//! `[eta, theta]`: the probability `rho(x)` of leaving through `eta`, the
//! expected exit time `psi(x)`, and the derivatives used by the boundary
//! limits.
//!
//! With `z(u) = alpha + beta·u`, the scale density of the process is
//! proportional to `φ(z(u))` and the speed density to `1/φ(z(u))`, so
//!
//! ```text
//! rho(x) = (Φ(z(θ)) - Φ(z(x))) / (Φ(z(θ)) - Φ(z(η)))
//! psi(x) = 2/β · [ rho(x)     ∫_η^x (Φ(z(u)) - Φ(z(η))) / φ(z(u)) du
//!                + (1-rho(x)) ∫_x^θ (Φ(z(θ)) - Φ(z(u))) / φ(z(u)) du ]
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::numerics::diff::{richardson, Extrapolated, DIFF_LEVELS};
use crate::numerics::quadrature::{integrate, QuadratureSpec};
use crate::numerics::special::{std_normal_cdf, GaussMass};
use crate::ou_model::{Boundary, OuParams};
use crate::real::{lit, Real};

/// Denominator of the exit-time integrands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitTimeDenominator {
    /// Normal density `φ(z(u))`; the correct speed measure.
    #[default]
    Density,
    /// Normal distribution function `Φ(z(u))`. Diagnostic only: it does not
    /// solve the exit-time equation and exists to show that it fails.
    Cdf,
}

/// First stencil offset for boundary derivatives, as a fraction of the corridor width.
pub const BOUNDARY_STEP_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionalContext<T> {
    params: OuParams<T>,
    eta: T,
    theta: T,
    quad: QuadratureSpec<T>,
    alpha: T,
    beta: T,
    /// `Φ(z(θ)) - Φ(z(η))`
    corridor_mass: GaussMass<T>,
    denominator: ExitTimeDenominator,
}

impl<T: Real> FunctionalContext<T> {
    pub fn new(params: OuParams<T>, eta: T, theta: T, quad: QuadratureSpec<T>) -> Result<Self> {
        ensure!(
            eta.is_finite() && theta.is_finite(),
            "eta={eta} and theta={theta} must be finite"
        );
        ensure!(eta < theta, "eta={eta} must be < theta={theta}");
        let (alpha, beta) = params.alpha_beta();
        let corridor_mass = GaussMass::between(alpha + beta * eta, alpha + beta * theta);
        ensure!(
            corridor_mass.weight > T::zero() && corridor_mass.weight.is_finite(),
            "normal mass between z(eta) and z(theta) is not positive"
        );
        Ok(FunctionalContext {
            params,
            eta,
            theta,
            quad,
            alpha,
            beta,
            corridor_mass,
            denominator: ExitTimeDenominator::Density,
        })
    }

    pub fn with_denominator(mut self, denominator: ExitTimeDenominator) -> Self {
        self.denominator = denominator;
        self
    }

    pub fn params(&self) -> &OuParams<T> {
        &self.params
    }

    pub fn eta(&self) -> T {
        self.eta
    }

    pub fn theta(&self) -> T {
        self.theta
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn beta(&self) -> T {
        self.beta
    }

    pub fn quad(&self) -> &QuadratureSpec<T> {
        &self.quad
    }

    pub fn denominator(&self) -> ExitTimeDenominator {
        self.denominator
    }

    pub fn width(&self) -> T {
        self.theta - self.eta
    }

    /// `Φ(z(θ)) - Φ(z(η))` as a plain number.
    pub fn corridor_mass(&self) -> GaussMass<T> {
        self.corridor_mass
    }

    #[inline]
    pub fn z(&self, u: T) -> T {
        self.alpha + self.beta * u
    }

    fn check_inside(&self, x: T) -> Result<()> {
        ensure!(
            self.eta <= x && x <= self.theta,
            "x={x} must lie in [eta={}, theta={}]",
            self.eta,
            self.theta
        );
        Ok(())
    }

    /// Probability of reaching `eta` before `theta` from `x`.
    pub fn rho(&self, x: T) -> Result<T> {
        self.check_inside(x)?;
        if x == self.eta {
            return Ok(T::one());
        }
        if x == self.theta {
            return Ok(T::zero());
        }
        Ok(GaussMass::between(self.z(x), self.z(self.theta)).ratio(&self.corridor_mass))
    }

    /// `1 - rho(x)`, computed directly.
    pub fn rho_complement(&self, x: T) -> Result<T> {
        self.check_inside(x)?;
        if x == self.eta {
            return Ok(T::zero());
        }
        if x == self.theta {
            return Ok(T::one());
        }
        Ok(GaussMass::between(self.z(self.eta), self.z(x)).ratio(&self.corridor_mass))
    }

    /// `rho'(x) = -β φ(z(x)) / (Φ(z(θ)) - Φ(z(η)))`.
    pub fn rho_prime(&self, x: T) -> Result<T> {
        self.check_inside(x)?;
        Ok(-self.beta / self.corridor_mass.over_pdf(self.z(x)))
    }

    /// `(Φ(z(u)) - Φ(z(η))) / denominator(z(u))`
    fn lower_integrand(&self, u: T) -> T {
        let zu = self.z(u);
        let mass = GaussMass::between(self.z(self.eta), zu);
        match self.denominator {
            ExitTimeDenominator::Density => mass.over_pdf(zu),
            ExitTimeDenominator::Cdf => mass.value() / std_normal_cdf(zu),
        }
    }

    /// `(Φ(z(θ)) - Φ(z(u))) / denominator(z(u))`
    fn upper_integrand(&self, u: T) -> T {
        let zu = self.z(u);
        let mass = GaussMass::between(zu, self.z(self.theta));
        match self.denominator {
            ExitTimeDenominator::Density => mass.over_pdf(zu),
            ExitTimeDenominator::Cdf => mass.value() / std_normal_cdf(zu),
        }
    }

    /// `∫_η^x` of the lower integrand.
    pub fn lower_integral(&self, x: T) -> Result<T> {
        self.check_inside(x)?;
        integrate(|u| self.lower_integrand(u), self.eta, x, &self.quad)
    }

    /// `∫_x^θ` of the upper integrand.
    pub fn upper_integral(&self, x: T) -> Result<T> {
        self.check_inside(x)?;
        integrate(|u| self.upper_integrand(u), x, self.theta, &self.quad)
    }

    /// Expected time to leave `(eta, theta)` starting from `x`.
    pub fn psi(&self, x: T) -> Result<T> {
        self.check_inside(x)?;
        if x == self.eta || x == self.theta {
            return Ok(T::zero());
        }
        let rho = self.rho(x)?;
        let rho_c = self.rho_complement(x)?;
        let lower = self.lower_integral(x)?;
        let upper = self.upper_integral(x)?;
        Ok(lit::<T>(2.0) / self.beta * (rho * lower + rho_c * upper))
    }

    /// One-sided derivative of `psi` at a boundary.
    pub fn psi_prime_at_boundary(&self, which: Boundary) -> Result<Extrapolated<T>> {
        let h0 = lit::<T>(BOUNDARY_STEP_FRACTION) * self.width();
        self.psi_prime_at_boundary_with_step(which, h0)
    }

    /// As [`psi_prime_at_boundary`](Self::psi_prime_at_boundary) with an
    /// explicit first offset `h0 > 0`, halved through the Richardson levels.
    pub fn psi_prime_at_boundary_with_step(
        &self,
        which: Boundary,
        h0: T,
    ) -> Result<Extrapolated<T>> {
        ensure!(
            h0 > T::zero() && h0 < self.width(),
            "boundary step h0={h0} must lie in (0, theta - eta)"
        );
        let (origin, dir) = match which {
            Boundary::Lower => (self.eta, T::one()),
            Boundary::Upper => (self.theta, -T::one()),
        };
        let mut raw = Vec::with_capacity(DIFF_LEVELS);
        for k in 0..DIFF_LEVELS {
            let h = h0 / lit(2f64.powi(k as i32)) * dir;
            raw.push(self.psi(origin + h)? / h);
        }
        Ok(richardson(&raw, 1, 1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::diff::{central_diff, central_second_diff};
    use crate::numerics::special::std_normal_pdf;

    // 40-digit values for a=-1, b=0.5, eta=1, theta=3.
    const RHO_15: f64 = 0.7804532125940015543331619;
    const PSI_15: f64 = 0.6134497508026757661867275;
    const PSI_PRIME_ETA: f64 = 1.449556918014152663636456;
    const PSI_TABLE: [(f64, f64, f64); 3] = [
        (1.2, 0.9220727061648447034082874, 0.276190242854745247530221),
        (2.0, 0.5, 0.8533712085920896115874591),
        (
            2.5,
            0.2195467874059984456668381,
            0.6134497508026757661867275,
        ),
    ];
    const CDF_PSI_15: f64 = 0.581005097593732661630165;

    fn ctx(a: f64, b: f64, eta: f64, theta: f64) -> FunctionalContext<f64> {
        FunctionalContext::new(
            OuParams::new(a, b).unwrap(),
            eta,
            theta,
            QuadratureSpec::default(),
        )
        .unwrap()
    }

    fn pinned() -> FunctionalContext<f64> {
        ctx(-1.0, 0.5, 1.0, 3.0)
    }

    #[test]
    fn reference_values() {
        let c = pinned();
        assert!((c.rho(1.5).unwrap() - RHO_15).abs() < 1e-14);
        assert!((c.psi(1.5).unwrap() - PSI_15).abs() < 1e-10);
        for (x, rho, psi) in PSI_TABLE {
            assert!((c.rho(x).unwrap() - rho).abs() < 1e-14, "rho({x})");
            assert!((c.psi(x).unwrap() - psi).abs() < 1e-10, "psi({x})");
            assert!((c.rho(x).unwrap() + c.rho_complement(x).unwrap() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn boundary_pinning() {
        let c = pinned();
        assert_eq!(c.rho(1.0).unwrap(), 1.0);
        assert_eq!(c.rho(3.0).unwrap(), 0.0);
        assert_eq!(c.psi(1.0).unwrap(), 0.0);
        assert_eq!(c.psi(3.0).unwrap(), 0.0);
        assert!(c.rho(0.99).is_err());
        assert!(c.psi(3.01).is_err());
        assert!(c.rho_prime(3.5).is_err());
    }

    #[test]
    fn context_validation() {
        let p = OuParams::new(-1.0, 0.5).unwrap();
        assert!(FunctionalContext::new(p, 3.0, 1.0, QuadratureSpec::default()).is_err());
        assert!(FunctionalContext::new(p, 2.0, 2.0, QuadratureSpec::default()).is_err());
    }

    #[test]
    fn rho_decreasing_and_derivative_consistent() {
        for c in [
            pinned(),
            ctx(-2.0, 0.25, 0.5, 5.0),
            ctx(-0.5, 1.0, 0.0, 6.0),
        ] {
            let mut prev = 1.0;
            for i in 1..50 {
                let x = c.eta() + c.width() * i as f64 / 50.0;
                let r = c.rho(x).unwrap();
                assert!(r < prev, "rho not decreasing at {x}");
                prev = r;
                let rp = c.rho_prime(x).unwrap();
                assert!(rp < 0.0);
                let h0 = 1e-2 * c.width();
                let num = central_diff(|u| c.rho(u).unwrap(), x, h0).unwrap();
                assert!(
                    (num.value - rp).abs() < 1e-8,
                    "rho' at {x}: {} vs {rp}",
                    num.value
                );
            }
        }
    }

    #[test]
    fn rho_prime_symmetric_zero_drift() {
        let p = OuParams::with_any_drift(0.0, 0.8).unwrap();
        let c = FunctionalContext::new(p, 1.0, 2.0, QuadratureSpec::default()).unwrap();
        let beta = (1.6f64).sqrt();
        let direct = -beta * std_normal_pdf(beta * 1.5)
            / (std_normal_cdf(beta * 2.0) - std_normal_cdf(beta * 1.0));
        assert!((c.rho_prime(1.5).unwrap() - direct).abs() < 1e-14);
    }

    #[test]
    fn exit_time_solves_its_ode() {
        for c in [
            pinned(),
            ctx(-2.0, 0.25, 0.5, 5.0),
            ctx(-0.5, 1.0, 1.0, 4.0),
        ] {
            let (a, b) = (c.params().a(), c.params().b());
            for i in 1..=10 {
                let x = c.eta() + c.width() * i as f64 / 11.0;
                let h0 = 0.02 * c.width();
                let d1 = central_diff(|u| c.psi(u).unwrap(), x, h0).unwrap().value;
                let d2 = central_second_diff(|u| c.psi(u).unwrap(), x, h0)
                    .unwrap()
                    .value;
                let residual = 0.5 * d2 + (a + b * x) * d1 + 1.0;
                assert!(residual.abs() < 1e-4, "residual {residual} at x={x}");
            }
        }
    }

    #[test]
    fn cdf_denominator_breaks_the_ode() {
        let c = pinned().with_denominator(ExitTimeDenominator::Cdf);
        assert!((c.psi(1.5).unwrap() - CDF_PSI_15).abs() < 1e-10);
        let x = 1.8;
        let d1 = central_diff(|u| c.psi(u).unwrap(), x, 0.04).unwrap().value;
        let d2 = central_second_diff(|u| c.psi(u).unwrap(), x, 0.04)
            .unwrap()
            .value;
        assert!((0.5 * d2 + (-1.0 + 0.5 * x) * d1 + 1.0).abs() > 1e-2);
    }

    #[test]
    fn boundary_derivatives() {
        let c = pinned();
        let lower = c.psi_prime_at_boundary(Boundary::Lower).unwrap();
        let upper = c.psi_prime_at_boundary(Boundary::Upper).unwrap();
        assert!(lower.reliable && upper.reliable);
        assert!(
            (lower.value - PSI_PRIME_ETA).abs() < 1e-7,
            "{}",
            lower.value
        );
        assert!(
            (upper.value + PSI_PRIME_ETA).abs() < 1e-7,
            "{}",
            upper.value
        );
        let coarse = c
            .psi_prime_at_boundary_with_step(Boundary::Lower, 1e-3)
            .unwrap();
        let fine = c
            .psi_prime_at_boundary_with_step(Boundary::Lower, 1e-4)
            .unwrap();
        assert!((coarse.value - fine.value).abs() < 1e-6);
        assert!(c
            .psi_prime_at_boundary_with_step(Boundary::Lower, 0.0)
            .is_err());
    }

    #[test]
    fn boundary_derivative_matches_closed_form() {
        // psi'(eta) = -(2/β) rho'(eta) ∫_η^θ (Φ(z(θ)) - Φ(z(u)))/φ(z(u)) du
        for c in [
            ctx(-2.0, 0.25, 0.0, 6.0),
            ctx(-0.5, 1.0, 2.0, 5.5),
            ctx(-1.0, 0.5, 3.0, 3.5),
        ] {
            let n = 20_000;
            let h = c.width() / n as f64;
            let zt = c.z(c.theta());
            let g = |u: f64| {
                let zu = c.z(u);
                (std_normal_cdf(zt) - std_normal_cdf(zu)) / std_normal_pdf(zu)
            };
            let mut simpson = g(c.eta()) + g(c.theta());
            for i in 1..n {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                simpson += w * g(c.eta() + i as f64 * h);
            }
            simpson *= h / 3.0;
            let oracle = -2.0 / c.beta() * c.rho_prime(c.eta()).unwrap() * simpson;
            let got = c.psi_prime_at_boundary(Boundary::Lower).unwrap().value;
            assert!(((got - oracle) / oracle).abs() < 1e-6, "{got} vs {oracle}");
        }
    }

    #[test]
    fn wide_corridor_stays_finite() {
        let c = ctx(-1.0, 2.0, 0.0, 30.0);
        let p = c.psi(15.0).unwrap();
        assert!(p.is_finite() && p > 0.0);
        let r = c.rho(0.4).unwrap();
        assert!(r > 0.0 && r < 1.0);
    }
}

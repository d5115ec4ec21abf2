//! One-parameter bivariate copula families: Gaussian, Clayton and Gumbel.
//!
//! Each family provides the copula CDF, the log-density, analytic partial
//! derivatives in both arguments and the dependence parameter, the response
//! and link maps for the dependence parameter, the closed-form Kendall's tau
//! and tail-dependence coefficients, and a sampler.
//!
//! Numerical conventions:
//! - Arguments must lie strictly inside (0,1); [`clamp_unit`] pins
//!   machine-boundary probabilities to `[1e-12, 1-1e-12]` before copula calls.
//! - The Gaussian log-density is evaluated in z-space (normal scores).
//! - Clayton and Gumbel sums are evaluated in log space so large dependence
//!   parameters do not overflow.
//! - Log-densities are capped at `+-1e8` so risk sums stay finite near corners.

use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{bisect, gauss_legendre_32, norm_cdf, norm_pdf, norm_quantile};

/// Probabilities fed to copula routines are clamped inside the open unit
/// interval at this distance from the boundary.
pub const UNIT_EPS: f64 = 1e-12;

/// Cap on the magnitude of the copula log-density near corners.
pub const LOG_DENSITY_CAP: f64 = 1e8;

/// Clamp a probability into `[UNIT_EPS, 1 - UNIT_EPS]`.
#[inline]
pub fn clamp_unit(u: f64) -> f64 {
    u.clamp(UNIT_EPS, 1.0 - UNIT_EPS)
}

/// Copula family identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CopulaFamily {
    Gaussian,
    Clayton,
    Gumbel,
}

/// Which copula argument a partial derivative refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CopulaArg {
    U1,
    U2,
}

/// Kendall's tau and tail-dependence coefficients at a parameter value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DependenceSummary {
    pub kendall_tau: f64,
    pub lambda_lower: f64,
    pub lambda_upper: f64,
}

fn check_u(u1: f64, u2: f64) -> Result<()> {
    if !(u1 > 0.0 && u1 < 1.0 && u2 > 0.0 && u2 < 1.0) {
        return Err(Error::domain(format!(
            "copula arguments must lie strictly in (0,1), got ({u1}, {u2})"
        )));
    }
    Ok(())
}

impl CopulaFamily {
    pub const ALL: [CopulaFamily; 3] = [
        CopulaFamily::Gaussian,
        CopulaFamily::Clayton,
        CopulaFamily::Gumbel,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            CopulaFamily::Gaussian => "gaussian",
            CopulaFamily::Clayton => "clayton",
            CopulaFamily::Gumbel => "gumbel",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "gauss" | "normal" => Ok(CopulaFamily::Gaussian),
            "clayton" => Ok(CopulaFamily::Clayton),
            "gumbel" => Ok(CopulaFamily::Gumbel),
            other => Err(Error::Config(format!("unknown copula family `{other}`"))),
        }
    }

    /// Validates that `theta` lies in the family's open parameter domain.
    pub fn check_theta(&self, theta: f64) -> Result<()> {
        let ok = theta.is_finite()
            && match self {
                CopulaFamily::Gaussian => theta > -1.0 && theta < 1.0,
                CopulaFamily::Clayton => theta > 0.0,
                CopulaFamily::Gumbel => theta > 1.0,
            };
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "dependence parameter {theta} outside the {} domain",
                self.name()
            )))
        }
    }

    /// C(u1, u2; theta).
    pub fn cdf(&self, u1: f64, u2: f64, theta: f64) -> Result<f64> {
        check_u(u1, u2)?;
        self.check_theta(theta)?;
        Ok(match self {
            CopulaFamily::Gaussian => {
                let z1 = norm_quantile(u1);
                let z2 = norm_quantile(u2);
                bivariate_normal_cdf(z1, z2, theta)
            }
            CopulaFamily::Clayton => {
                let ln_s = clayton_ln_s(u1.ln(), u2.ln(), theta);
                (-ln_s / theta).exp()
            }
            CopulaFamily::Gumbel => {
                let x1 = -u1.ln();
                let x2 = -u2.ln();
                let ln_s = gumbel_ln_s(x1, x2, theta);
                (-(ln_s / theta).exp()).exp()
            }
        }
        .clamp(0.0, 1.0))
    }

    /// log c(u1, u2; theta), capped at `+-LOG_DENSITY_CAP`.
    pub fn log_density(&self, u1: f64, u2: f64, theta: f64) -> Result<f64> {
        check_u(u1, u2)?;
        self.check_theta(theta)?;
        let v = match self {
            CopulaFamily::Gaussian => {
                let z1 = norm_quantile(u1);
                let z2 = norm_quantile(u2);
                let r2 = 1.0 - theta * theta;
                // (z1 * z2) grouped so the density is exchangeable to the last ulp
                -0.5 * r2.ln()
                    - (theta * theta * (z1 * z1 + z2 * z2) - 2.0 * theta * (z1 * z2)) / (2.0 * r2)
            }
            CopulaFamily::Clayton => {
                let (l1, l2) = (u1.ln(), u2.ln());
                let ln_s = clayton_ln_s(l1, l2, theta);
                (1.0 + theta).ln() - (1.0 + theta) * (l1 + l2) - (2.0 + 1.0 / theta) * ln_s
            }
            CopulaFamily::Gumbel => {
                let x1 = -u1.ln();
                let x2 = -u2.ln();
                let ln_s = gumbel_ln_s(x1, x2, theta);
                let a = (ln_s / theta).exp();
                -a + (theta - 1.0) * (x1.ln() + x2.ln())
                    + (x1 + x2)
                    + (1.0 / theta - 2.0) * ln_s
                    + (a + theta - 1.0).ln()
            }
        };
        Ok(if v.is_nan() { -LOG_DENSITY_CAP } else { v.clamp(-LOG_DENSITY_CAP, LOG_DENSITY_CAP) })
    }

    /// Partial derivative of the log-density with respect to one argument.
    pub fn dlogc_du(&self, u1: f64, u2: f64, theta: f64, which: CopulaArg) -> Result<f64> {
        check_u(u1, u2)?;
        self.check_theta(theta)?;
        // All three families are exchangeable; differentiate w.r.t. the first
        // argument of a possibly swapped pair.
        let (ua, ub) = match which {
            CopulaArg::U1 => (u1, u2),
            CopulaArg::U2 => (u2, u1),
        };
        Ok(match self {
            CopulaFamily::Gaussian => {
                let za = norm_quantile(ua);
                let zb = norm_quantile(ub);
                let r2 = 1.0 - theta * theta;
                let dlogc_dza = theta * (zb - theta * za) / r2;
                dlogc_dza / norm_pdf(za)
            }
            CopulaFamily::Clayton => {
                let (la, lb) = (ua.ln(), ub.ln());
                let ln_s = clayton_ln_s(la, lb, theta);
                // d/du [ -(1+theta) ln u ] + d/du [ -(2+1/theta) ln S ]
                -(1.0 + theta) / ua + (2.0 * theta + 1.0) * (-(theta + 1.0) * la - ln_s).exp()
            }
            CopulaFamily::Gumbel => {
                let xa = -ua.ln();
                let xb = -ub.ln();
                let ln_s = gumbel_ln_s(xa, xb, theta);
                let a = (ln_s / theta).exp();
                // dA/dx_a = S^{1/theta - 1} x_a^{theta-1}
                let da_dxa = ((1.0 / theta - 1.0) * ln_s + (theta - 1.0) * xa.ln()).exp();
                let ds_dxa_over_s = theta * ((theta - 1.0) * xa.ln() - ln_s).exp();
                let dlogc_dxa = -da_dxa
                    + (theta - 1.0) / xa
                    + 1.0
                    + (1.0 / theta - 2.0) * ds_dxa_over_s
                    + da_dxa / (a + theta - 1.0);
                -dlogc_dxa / ua
            }
        })
    }

    /// Partial derivative of the log-density with respect to the dependence parameter.
    pub fn dlogc_dtheta(&self, u1: f64, u2: f64, theta: f64) -> Result<f64> {
        check_u(u1, u2)?;
        self.check_theta(theta)?;
        Ok(match self {
            CopulaFamily::Gaussian => {
                let z1 = norm_quantile(u1);
                let z2 = norm_quantile(u2);
                let r2 = 1.0 - theta * theta;
                theta / r2
                    + (z1 * z2 * (1.0 + theta * theta) - theta * (z1 * z1 + z2 * z2)) / (r2 * r2)
            }
            CopulaFamily::Clayton => {
                let (l1, l2) = (u1.ln(), u2.ln());
                let ln_s = clayton_ln_s(l1, l2, theta);
                // dS/dtheta / S = -(e^{-theta l1 - lnS} l1 + e^{-theta l2 - lnS} l2)
                let ds_over_s =
                    -((-theta * l1 - ln_s).exp() * l1 + (-theta * l2 - ln_s).exp() * l2);
                1.0 / (1.0 + theta) - (l1 + l2) + ln_s / (theta * theta)
                    - (2.0 + 1.0 / theta) * ds_over_s
            }
            CopulaFamily::Gumbel => {
                let x1 = -u1.ln();
                let x2 = -u2.ln();
                let ln_s = gumbel_ln_s(x1, x2, theta);
                let a = (ln_s / theta).exp();
                let dlns_dtheta = (theta * x1.ln() - ln_s).exp() * x1.ln()
                    + (theta * x2.ln() - ln_s).exp() * x2.ln();
                let da_dtheta = a * (dlns_dtheta / theta - ln_s / (theta * theta));
                -da_dtheta + (x1.ln() + x2.ln()) - ln_s / (theta * theta)
                    + (1.0 / theta - 2.0) * dlns_dtheta
                    + (da_dtheta + 1.0) / (a + theta - 1.0)
            }
        })
    }

    /// Kendall's tau as a closed-form map of the dependence parameter.
    pub fn kendall_tau(&self, theta: f64) -> Result<f64> {
        self.check_theta(theta)?;
        Ok(match self {
            CopulaFamily::Gaussian => 2.0 / std::f64::consts::PI * theta.asin(),
            CopulaFamily::Clayton => theta / (theta + 2.0),
            CopulaFamily::Gumbel => 1.0 - 1.0 / theta,
        })
    }

    /// Inverse of [`CopulaFamily::kendall_tau`].
    pub fn theta_from_tau(&self, tau: f64) -> Result<f64> {
        match self {
            CopulaFamily::Gaussian => {
                if !(tau > -1.0 && tau < 1.0) {
                    return Err(Error::domain(format!("tau {tau} outside (-1,1)")));
                }
                Ok((std::f64::consts::PI * tau / 2.0).sin())
            }
            CopulaFamily::Clayton => {
                if !(tau > 0.0 && tau < 1.0) {
                    return Err(Error::domain(format!("clayton requires tau in (0,1), got {tau}")));
                }
                Ok(2.0 * tau / (1.0 - tau))
            }
            CopulaFamily::Gumbel => {
                if !(tau > 0.0 && tau < 1.0) {
                    return Err(Error::domain(format!("gumbel requires tau in (0,1), got {tau}")));
                }
                Ok(1.0 / (1.0 - tau))
            }
        }
    }

    /// Lower/upper tail-dependence coefficients together with Kendall's tau.
    pub fn tail_dependence(&self, theta: f64) -> Result<DependenceSummary> {
        let kendall_tau = self.kendall_tau(theta)?;
        let (lambda_lower, lambda_upper) = match self {
            CopulaFamily::Gaussian => (0.0, 0.0),
            CopulaFamily::Clayton => ((2.0f64).powf(-1.0 / theta), 0.0),
            CopulaFamily::Gumbel => (0.0, 2.0 - (2.0f64).powf(1.0 / theta)),
        };
        Ok(DependenceSummary {
            kendall_tau,
            lambda_lower,
            lambda_upper,
        })
    }

    /// Response map from an unconstrained predictor to the parameter domain.
    ///
    /// tanh for the Gaussian, exp for Clayton, 1 + exp for Gumbel. Predictors
    /// are clamped so the image stays strictly inside the open domain in f64.
    pub fn response(&self, eta: f64) -> f64 {
        match self {
            CopulaFamily::Gaussian => eta.clamp(-18.0, 18.0).tanh(),
            CopulaFamily::Clayton => eta.clamp(-34.0, 34.0).exp(),
            CopulaFamily::Gumbel => 1.0 + eta.clamp(-34.0, 34.0).exp(),
        }
    }

    /// d(theta)/d(eta) of the response map.
    pub fn d_response(&self, eta: f64) -> f64 {
        match self {
            CopulaFamily::Gaussian => {
                let t = eta.clamp(-18.0, 18.0).tanh();
                1.0 - t * t
            }
            CopulaFamily::Clayton => eta.clamp(-34.0, 34.0).exp(),
            CopulaFamily::Gumbel => eta.clamp(-34.0, 34.0).exp(),
        }
    }

    /// Link function (inverse response).
    pub fn link(&self, theta: f64) -> Result<f64> {
        self.check_theta(theta)?;
        Ok(match self {
            CopulaFamily::Gaussian => theta.atanh(),
            CopulaFamily::Clayton => theta.ln(),
            CopulaFamily::Gumbel => (theta - 1.0).ln(),
        })
    }

    /// Draw `n` pairs from the copula.
    ///
    /// Gaussian: Cholesky of the 2x2 correlation then normal scores.
    /// Clayton: gamma-frailty (Marshall-Olkin) construction.
    /// Gumbel: conditional inversion with a bisection-inverted h-function.
    pub fn sample_pair<R: Rng + ?Sized>(
        &self,
        theta: f64,
        n: usize,
        rng: &mut R,
    ) -> Result<Vec<(f64, f64)>> {
        self.check_theta(theta)?;
        let mut out = Vec::with_capacity(n);
        match self {
            CopulaFamily::Gaussian => {
                let normal = rand_distr::StandardNormal;
                let w = (1.0 - theta * theta).sqrt();
                for _ in 0..n {
                    let a: f64 = normal.sample(rng);
                    let b: f64 = normal.sample(rng);
                    out.push((norm_cdf(a), norm_cdf(theta * a + w * b)));
                }
            }
            CopulaFamily::Clayton => {
                let frailty = rand_distr::Gamma::new(1.0 / theta, 1.0)
                    .map_err(|e| Error::domain(format!("clayton frailty: {e}")))?;
                for _ in 0..n {
                    let w: f64 = frailty.sample(rng);
                    let e1 = -rng.random_range(f64::MIN_POSITIVE..1.0f64).ln();
                    let e2 = -rng.random_range(f64::MIN_POSITIVE..1.0f64).ln();
                    let u1 = (1.0 + e1 / w).powf(-1.0 / theta);
                    let u2 = (1.0 + e2 / w).powf(-1.0 / theta);
                    out.push((clamp_unit(u1), clamp_unit(u2)));
                }
            }
            CopulaFamily::Gumbel => {
                for _ in 0..n {
                    let u1: f64 = clamp_unit(rng.random_range(0.0..1.0));
                    let w: f64 = rng.random_range(1e-12..(1.0 - 1e-12));
                    let h = |u2: f64| gumbel_h(u2, u1, theta) - w;
                    let u2 = bisect(h, UNIT_EPS, 1.0 - UNIT_EPS, 1e-10, 200)?;
                    out.push((u1, clamp_unit(u2)));
                }
            }
        }
        Ok(out)
    }
}

/// ln(u1^{-theta} + u2^{-theta} - 1) from the log-arguments, in a form stable
/// for both tiny and huge theta.
#[inline]
fn clayton_ln_s(l1: f64, l2: f64, theta: f64) -> f64 {
    let a1 = -theta * l1;
    let a2 = -theta * l2;
    let m = a1.max(a2).max(0.0);
    m + ((a1 - m).exp() + (a2 - m).exp() - (-m).exp()).ln()
}

/// ln(x1^theta + x2^theta) for x_i > 0, stable for large theta.
#[inline]
fn gumbel_ln_s(x1: f64, x2: f64, theta: f64) -> f64 {
    let (hi, lo) = if x1 >= x2 { (x1, x2) } else { (x2, x1) };
    theta * hi.ln() + (theta * (lo.ln() - hi.ln())).exp().ln_1p()
}

/// Gumbel h-function P(U2 <= u2 | U1 = u1) = dC/du1.
fn gumbel_h(u2: f64, u1: f64, theta: f64) -> f64 {
    let x1 = -u1.ln();
    let x2 = -u2.ln();
    let ln_s = gumbel_ln_s(x1, x2, theta);
    let a = (ln_s / theta).exp();
    // C * S^{1/theta - 1} * x1^{theta-1} / u1
    (-a + (1.0 / theta - 1.0) * ln_s + (theta - 1.0) * x1.ln() + x1).exp()
}

/// Bivariate standard normal CDF with correlation `rho`, via the identity
/// Phi2(x, y; rho) = Phi(x) Phi(y) + (1/2pi) Int_0^{asin rho} exp(-(x^2 - 2 sin(s) x y + y^2) / (2 cos^2 s)) ds,
/// whose integrand is smooth and bounded on [0, asin rho].
pub(crate) fn bivariate_normal_cdf(x: f64, y: f64, rho: f64) -> f64 {
    let upper = rho.asin();
    let integral = gauss_legendre_32(0.0, upper, |s| {
        let (sin_s, cos_s) = s.sin_cos();
        (-(x * x - 2.0 * sin_s * x * y + y * y) / (2.0 * cos_s * cos_s)).exp()
    });
    (norm_cdf(x) * norm_cdf(y) + integral / (2.0 * std::f64::consts::PI)).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn random_theta(fam: CopulaFamily, rng: &mut ChaCha12Rng) -> f64 {
        match fam {
            CopulaFamily::Gaussian => rng.random_range(-0.95..0.95),
            CopulaFamily::Clayton => rng.random_range(0.05..8.0),
            CopulaFamily::Gumbel => rng.random_range(1.01..8.0),
        }
    }

    #[test]
    fn cdf_reference_values() {
        // independence cases
        let c = CopulaFamily::Gaussian.cdf(0.3, 0.7, 0.0).unwrap();
        assert_relative_eq!(c, 0.21, epsilon = 1e-12);
        let c = CopulaFamily::Gumbel.cdf(0.3, 0.7, 1.0 + 1e-14).unwrap();
        assert_relative_eq!(c, 0.21, epsilon = 1e-10);
        // standard Clayton closed form at theta = 1: (2 + 2 - 1)^{-1} = 1/3
        let c = CopulaFamily::Clayton.cdf(0.5, 0.5, 1.0).unwrap();
        assert_relative_eq!(c, 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn bivariate_normal_reference_values() {
        // Phi2(0,0;rho) = 1/4 + asin(rho)/(2 pi)
        for &rho in &[-0.9f64, -0.3, 0.0, 0.5, 0.71, 0.99] {
            let expected = 0.25 + rho.asin() / (2.0 * std::f64::consts::PI);
            assert_relative_eq!(bivariate_normal_cdf(0.0, 0.0, rho), expected, epsilon = 1e-12);
        }
        // comonotone-ish behaviour: C(0.9, 0.9; 0.99) close to 0.9 - (1 - 0.9)
        let c = CopulaFamily::Gaussian.cdf(0.9, 0.9, 0.99).unwrap();
        assert!((c - 0.1f64 - 0.8).abs() < 0.01, "c = {c}");
    }

    #[test]
    fn uniform_margins() {
        let eps = 1e-9;
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        for fam in CopulaFamily::ALL {
            for _ in 0..40 {
                let theta = random_theta(fam, &mut rng);
                let u: f64 = rng.random_range(0.02..0.98);
                let c = fam.cdf(u, 1.0 - eps, theta).unwrap();
                assert_relative_eq!(c, u, epsilon = 1e-6);
                let c = fam.cdf(1.0 - eps, u, theta).unwrap();
                assert_relative_eq!(c, u, epsilon = 1e-6);
                // grounded at the lower corner
                let c = fam.cdf(u, 1e-11, theta).unwrap();
                assert!(c < 1e-9, "{fam:?}: {c}");
            }
        }
    }

    #[test]
    fn two_increasing_on_random_rectangles() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        for fam in CopulaFamily::ALL {
            for _ in 0..500 {
                let theta = random_theta(fam, &mut rng);
                let mut a1: f64 = rng.random_range(0.001..0.999);
                let mut b1: f64 = rng.random_range(0.001..0.999);
                if a1 > b1 {
                    std::mem::swap(&mut a1, &mut b1);
                }
                let mut a2: f64 = rng.random_range(0.001..0.999);
                let mut b2: f64 = rng.random_range(0.001..0.999);
                if a2 > b2 {
                    std::mem::swap(&mut a2, &mut b2);
                }
                let mass = fam.cdf(b1, b2, theta).unwrap() - fam.cdf(a1, b2, theta).unwrap()
                    - fam.cdf(b1, a2, theta).unwrap()
                    + fam.cdf(a1, a2, theta).unwrap();
                assert!(mass >= -1e-12, "{fam:?} theta={theta}: mass {mass}");
            }
        }
    }

    #[test]
    fn log_density_reference_values() {
        // Gaussian at independence: density identically one
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..50 {
            let u1: f64 = rng.random_range(0.01..0.99);
            let u2: f64 = rng.random_range(0.01..0.99);
            assert_relative_eq!(
                CopulaFamily::Gaussian.log_density(u1, u2, 0.0).unwrap(),
                0.0,
                epsilon = 1e-12
            );
        }
        // Clayton near the independence limit
        for _ in 0..50 {
            let u1: f64 = rng.random_range(0.05..0.95);
            let u2: f64 = rng.random_range(0.05..0.95);
            let v = CopulaFamily::Clayton.log_density(u1, u2, 1e-6).unwrap();
            assert!(v.abs() < 1e-4, "clayton theta->0 log density {v}");
        }
        // Gumbel at (numerically) the independence boundary
        for _ in 0..50 {
            let u1: f64 = rng.random_range(0.05..0.95);
            let u2: f64 = rng.random_range(0.05..0.95);
            let v = CopulaFamily::Gumbel.log_density(u1, u2, 1.0 + 1e-12).unwrap();
            assert!(v.abs() < 1e-9, "gumbel theta->1 log density {v}");
        }
    }

    #[test]
    fn density_is_exchangeable() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        for fam in CopulaFamily::ALL {
            for _ in 0..200 {
                let theta = random_theta(fam, &mut rng);
                let u1: f64 = rng.random_range(0.001..0.999);
                let u2: f64 = rng.random_range(0.001..0.999);
                let a = fam.log_density(u1, u2, theta).unwrap();
                let b = fam.log_density(u2, u1, theta).unwrap();
                assert_eq!(a, b, "{fam:?} not exchangeable at ({u1},{u2},{theta})");
            }
        }
    }

    /// Second mixed finite difference of the CDF reproduces the density.
    #[test]
    fn density_matches_cdf_mixed_partial() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let h = 1e-4;
        for fam in CopulaFamily::ALL {
            for _ in 0..200 {
                let theta = random_theta(fam, &mut rng);
                let u1: f64 = rng.random_range(0.05..0.95);
                let u2: f64 = rng.random_range(0.05..0.95);
                let c = |a: f64, b: f64| fam.cdf(a, b, theta).unwrap();
                let fd = (c(u1 + h, u2 + h) - c(u1 + h, u2 - h) - c(u1 - h, u2 + h)
                    + c(u1 - h, u2 - h))
                    / (4.0 * h * h);
                let dens = fam.log_density(u1, u2, theta).unwrap().exp();
                assert_relative_eq!(fd, dens, max_relative = 1e-3, epsilon = 1e-6);
            }
        }
        // frozen spot check: Clayton theta=2 at (0.5, 0.5)
        let dens = CopulaFamily::Clayton.log_density(0.5, 0.5, 2.0).unwrap().exp();
        let c = |a: f64, b: f64| CopulaFamily::Clayton.cdf(a, b, 2.0).unwrap();
        let fd = (c(0.5 + h, 0.5 + h) - c(0.5 + h, 0.5 - h) - c(0.5 - h, 0.5 + h)
            + c(0.5 - h, 0.5 - h))
            / (4.0 * h * h);
        assert_relative_eq!(dens, fd, max_relative = 1e-4);
    }

    /// The density integrates to one over the unit square (graded panels
    /// concentrate quadrature points near the corners).
    #[test]
    fn density_normalization() {
        let grid = [
            1e-9, 1e-6, 1e-4, 1e-2, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99, 1.0 - 1e-4, 1.0 - 1e-6,
            1.0 - 1e-9,
        ];
        for (fam, theta) in [
            (CopulaFamily::Gaussian, 0.71),
            (CopulaFamily::Gaussian, -0.5),
            (CopulaFamily::Clayton, 2.0),
            (CopulaFamily::Gumbel, 2.0),
        ] {
            let mut total = 0.0;
            for w in grid.windows(2) {
                for v in grid.windows(2) {
                    total += gauss_legendre_32(w[0], w[1], |u1| {
                        gauss_legendre_32(v[0], v[1], |u2| {
                            fam.log_density(u1, u2, theta).unwrap().exp()
                        })
                    });
                }
            }
            assert_relative_eq!(total, 1.0, epsilon = 1e-3);
        }
    }

    /// Analytic partials match central finite differences on 1000 random
    /// interior points per family.
    #[test]
    fn partials_match_finite_differences() {
        let h = 1e-6;
        for fam in CopulaFamily::ALL {
            let mut rng = ChaCha12Rng::seed_from_u64(6);
            for _ in 0..1000 {
                let theta = random_theta(fam, &mut rng);
                let u1: f64 = rng.random_range(0.01..0.99);
                let u2: f64 = rng.random_range(0.01..0.99);

                let fd_u1 = (fam.log_density(u1 + h, u2, theta).unwrap()
                    - fam.log_density(u1 - h, u2, theta).unwrap())
                    / (2.0 * h);
                let an_u1 = fam.dlogc_du(u1, u2, theta, CopulaArg::U1).unwrap();
                assert_relative_eq!(an_u1, fd_u1, max_relative = 1e-5, epsilon = 1e-6);

                let fd_u2 = (fam.log_density(u1, u2 + h, theta).unwrap()
                    - fam.log_density(u1, u2 - h, theta).unwrap())
                    / (2.0 * h);
                let an_u2 = fam.dlogc_du(u1, u2, theta, CopulaArg::U2).unwrap();
                assert_relative_eq!(an_u2, fd_u2, max_relative = 1e-5, epsilon = 1e-6);

                let ht = 1e-6 * theta.abs().max(1.0);
                let fd_th = (fam.log_density(u1, u2, theta + ht).unwrap()
                    - fam.log_density(u1, u2, theta - ht).unwrap())
                    / (2.0 * ht);
                let an_th = fam.dlogc_dtheta(u1, u2, theta).unwrap();
                assert_relative_eq!(an_th, fd_th, max_relative = 1e-5, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn dtheta_reference_values() {
        // Gaussian at rho = 0: d log c / d theta = z1 z2
        let v = CopulaFamily::Gaussian.dlogc_dtheta(0.5, 0.5, 0.0).unwrap();
        assert_relative_eq!(v, 0.0, epsilon = 1e-12);
        let u1 = 0.8;
        let u2 = 0.3;
        let v = CopulaFamily::Gaussian.dlogc_dtheta(u1, u2, 0.0).unwrap();
        assert_relative_eq!(v, norm_quantile(u1) * norm_quantile(u2), epsilon = 1e-9);
        // density constant at independence: dlogc/du = 0
        for which in [CopulaArg::U1, CopulaArg::U2] {
            let v = CopulaFamily::Gaussian.dlogc_du(0.3, 0.6, 0.0, which).unwrap();
            assert_relative_eq!(v, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn kendall_tau_and_tail_dependence() {
        let d = CopulaFamily::Clayton.tail_dependence(2.0).unwrap();
        assert_relative_eq!(d.kendall_tau, 0.5, epsilon = 1e-15);
        assert_relative_eq!(d.lambda_lower, 2.0f64.powf(-0.5), epsilon = 1e-15);
        assert_eq!(d.lambda_upper, 0.0);

        let d = CopulaFamily::Gumbel.tail_dependence(2.0).unwrap();
        assert_relative_eq!(d.kendall_tau, 0.5, epsilon = 1e-15);
        assert_relative_eq!(d.lambda_upper, 2.0 - std::f64::consts::SQRT_2, epsilon = 1e-15);
        assert_eq!(d.lambda_lower, 0.0);

        // medium positive correlation
        let d = CopulaFamily::Gaussian.tail_dependence(0.71).unwrap();
        assert_relative_eq!(d.kendall_tau, 2.0 / std::f64::consts::PI * 0.71f64.asin(), epsilon = 1e-15);
        assert!((d.kendall_tau - 0.5026).abs() < 1e-4);
        assert_eq!((d.lambda_lower, d.lambda_upper), (0.0, 0.0));

        // tau map inverses
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        for fam in CopulaFamily::ALL {
            for _ in 0..100 {
                let theta = random_theta(fam, &mut rng);
                let tau = fam.kendall_tau(theta).unwrap();
                if let Ok(back) = fam.theta_from_tau(tau) {
                    assert_relative_eq!(back, theta, max_relative = 1e-12);
                }
            }
        }
    }

    #[test]
    fn response_link_identities() {
        assert_eq!(CopulaFamily::Gaussian.response(0.0), 0.0);
        assert_relative_eq!(CopulaFamily::Clayton.response(0.0), 1.0);
        assert_relative_eq!(CopulaFamily::Gumbel.response(0.0), 2.0);
        assert_relative_eq!(CopulaFamily::Gaussian.response(0.8872), 0.71, epsilon = 1e-4);
        assert_relative_eq!(CopulaFamily::Gaussian.link(0.71).unwrap(), 0.8872, epsilon = 1e-4);

        for fam in CopulaFamily::ALL {
            let range = if fam == CopulaFamily::Gaussian { -4.0..4.0 } else { -8.0..8.0 };
            let mut rng = ChaCha12Rng::seed_from_u64(9);
            for _ in 0..200 {
                let eta: f64 = rng.random_range(range.clone());
                let theta = fam.response(eta);
                fam.check_theta(theta).unwrap();
                assert_relative_eq!(fam.link(theta).unwrap(), eta, epsilon = 1e-12, max_relative = 1e-12);
                // response derivative by finite differences
                let h = 1e-6;
                let fd = (fam.response(eta + h) - fam.response(eta - h)) / (2.0 * h);
                assert_relative_eq!(fam.d_response(eta), fd, max_relative = 1e-6, epsilon = 1e-9);
            }
        }
        assert!(CopulaFamily::Gumbel.link(1.0).is_err());
        assert!(CopulaFamily::Clayton.link(0.0).is_err());
        assert!(CopulaFamily::Gaussian.link(1.0).is_err());
    }

    #[test]
    fn samplers_reproduce_kendall_tau() {
        let n = 10_000;
        for (k, fam) in CopulaFamily::ALL.iter().enumerate() {
            let theta = match fam {
                CopulaFamily::Gaussian => 0.71,
                _ => 2.0,
            };
            let mut rng = ChaCha12Rng::seed_from_u64(20 + k as u64);
            let pairs = fam.sample_pair(theta, n, &mut rng).unwrap();
            let u1: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let u2: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let tau_hat = crate::numeric::kendall_tau_empirical(&u1, &u2);
            let tau = fam.kendall_tau(theta).unwrap();
            assert!(
                (tau_hat - tau).abs() < 0.03,
                "{fam:?}: tau_hat {tau_hat} vs tau {tau}"
            );
        }

        // Gaussian at independence: normal scores are uncorrelated
        let mut rng = ChaCha12Rng::seed_from_u64(30);
        let pairs = CopulaFamily::Gaussian.sample_pair(0.0, 10_000, &mut rng).unwrap();
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for (u1, u2) in &pairs {
            let z1 = norm_quantile(*u1);
            let z2 = norm_quantile(*u2);
            sxy += z1 * z2;
            sxx += z1 * z1;
            syy += z2 * z2;
        }
        let corr = sxy / (sxx * syy).sqrt();
        assert!(corr.abs() < 0.03, "corr {corr}");
    }

    /// Clayton mass concentrates in the lower-left corner more than a
    /// Gaussian copula of matched Kendall's tau.
    #[test]
    fn clayton_lower_tail_exceeds_gaussian() {
        let n = 10_000;
        let tau = 0.5;
        let th_c = CopulaFamily::Clayton.theta_from_tau(tau).unwrap();
        let th_g = CopulaFamily::Gaussian.theta_from_tau(tau).unwrap();
        let count = |pairs: &[(f64, f64)]| {
            pairs.iter().filter(|(a, b)| *a < 0.05 && *b < 0.05).count()
        };
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        let clayton = count(&CopulaFamily::Clayton.sample_pair(th_c, n, &mut rng).unwrap());
        let mut rng = ChaCha12Rng::seed_from_u64(32);
        let gauss = count(&CopulaFamily::Gaussian.sample_pair(th_g, n, &mut rng).unwrap());
        assert!(
            clayton > gauss,
            "clayton corner count {clayton} not above gaussian {gauss}"
        );
    }

    #[test]
    fn domain_errors() {
        assert!(CopulaFamily::Gaussian.cdf(0.0, 0.5, 0.3).is_err());
        assert!(CopulaFamily::Gaussian.cdf(0.5, 1.0, 0.3).is_err());
        assert!(CopulaFamily::Gaussian.cdf(0.5, 0.5, 1.0).is_err());
        assert!(CopulaFamily::Clayton.log_density(0.5, 0.5, 0.0).is_err());
        assert!(CopulaFamily::Clayton.log_density(0.5, 0.5, -1.0).is_err());
        assert!(CopulaFamily::Gumbel.kendall_tau(1.0).is_err());
    }
}

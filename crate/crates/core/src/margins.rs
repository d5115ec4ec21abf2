//! Two-parameter marginal distribution families on the positive real line.
//!
//! Each family exposes its log-density, CDF, quantile, mean, analytic partial
//! derivatives of the log-density and CDF with respect to both parameters,
//! and monotone response/link maps between unconstrained predictors and the
//! parameter space. All functions are pure; samplers take a caller-owned RNG.
//!
//! Parameter convention: `mu` is the location of the Log-Normal and the scale
//! of the Log-Logistic, Gamma and Weibull; `sigma` is the Log-Normal scale and
//! the shape of the other three. The Log-Normal location uses an identity
//! response; every positivity-constrained parameter uses `exp` (log link).

use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{digamma, gamma_lr, ln_gamma};

use crate::error::{Error, Result};
use crate::numeric::{self, norm_cdf, norm_pdf, norm_quantile, LN_2PI};

/// Predictor values are clamped to this magnitude before exponentiation so
/// response maps never overflow to infinity.
const ETA_CLAMP: f64 = 700.0;

/// Marginal family identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginFamily {
    LogNormal,
    LogLogistic,
    Gamma,
    Weibull,
}

impl MarginFamily {
    pub const ALL: [MarginFamily; 4] = [
        MarginFamily::LogNormal,
        MarginFamily::LogLogistic,
        MarginFamily::Gamma,
        MarginFamily::Weibull,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MarginFamily::LogNormal => "log_normal",
            MarginFamily::LogLogistic => "log_logistic",
            MarginFamily::Gamma => "gamma",
            MarginFamily::Weibull => "weibull",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "log_normal" | "lognormal" => Ok(MarginFamily::LogNormal),
            "log_logistic" | "loglogistic" => Ok(MarginFamily::LogLogistic),
            "gamma" => Ok(MarginFamily::Gamma),
            "weibull" => Ok(MarginFamily::Weibull),
            other => Err(Error::Config(format!("unknown marginal family `{other}`"))),
        }
    }
}

/// Which of the two distribution parameters an operation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarginParamKind {
    Mu,
    Sigma,
}

/// A concrete parameter pair for one marginal family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginParams {
    pub mu: f64,
    pub sigma: f64,
}

impl MarginParams {
    pub fn new(mu: f64, sigma: f64) -> Self {
        MarginParams { mu, sigma }
    }
}

fn check_params(family: MarginFamily, p: MarginParams) -> Result<()> {
    if !p.mu.is_finite() || !p.sigma.is_finite() {
        return Err(Error::domain(format!("non-finite parameters {p:?}")));
    }
    if p.sigma <= 0.0 {
        return Err(Error::domain(format!("sigma must be positive, got {}", p.sigma)));
    }
    if family != MarginFamily::LogNormal && p.mu <= 0.0 {
        return Err(Error::domain(format!(
            "mu must be positive for {}, got {}",
            family.name(),
            p.mu
        )));
    }
    Ok(())
}

fn check_y(y: f64) -> Result<()> {
    if !(y > 0.0) || !y.is_finite() {
        return Err(Error::domain(format!("response must be a positive real, got {y}")));
    }
    Ok(())
}

/// Numerically stable log(1 + exp(z)).
#[inline]
fn softplus(z: f64) -> f64 {
    if z > 35.0 {
        z
    } else if z < -35.0 {
        z.exp()
    } else {
        z.exp().ln_1p()
    }
}

/// Numerically stable logistic function 1 / (1 + exp(-z)).
#[inline]
fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl MarginFamily {
    /// log f(y | mu, sigma).
    pub fn log_pdf(&self, y: f64, p: MarginParams) -> Result<f64> {
        check_y(y)?;
        check_params(*self, p)?;
        Ok(match self {
            MarginFamily::LogNormal => {
                let z = (y.ln() - p.mu) / p.sigma;
                -y.ln() - p.sigma.ln() - 0.5 * LN_2PI - 0.5 * z * z
            }
            MarginFamily::LogLogistic => {
                let t = y.ln() - p.mu.ln();
                p.sigma.ln() + p.sigma * t - y.ln() - 2.0 * softplus(p.sigma * t)
            }
            MarginFamily::Gamma => {
                (p.sigma - 1.0) * y.ln() - y / p.mu - ln_gamma(p.sigma) - p.sigma * p.mu.ln()
            }
            MarginFamily::Weibull => {
                let t = y.ln() - p.mu.ln();
                let w = (p.sigma * t).exp();
                p.sigma.ln() - y.ln() + p.sigma * t - w
            }
        })
    }

    /// F(y | mu, sigma).
    pub fn cdf(&self, y: f64, p: MarginParams) -> Result<f64> {
        check_y(y)?;
        check_params(*self, p)?;
        Ok(match self {
            MarginFamily::LogNormal => norm_cdf((y.ln() - p.mu) / p.sigma),
            MarginFamily::LogLogistic => logistic(p.sigma * (y.ln() - p.mu.ln())),
            MarginFamily::Gamma => gamma_lr(p.sigma, y / p.mu),
            MarginFamily::Weibull => {
                let w = (p.sigma * (y.ln() - p.mu.ln())).exp();
                -(-w).exp_m1()
            }
        })
    }

    /// Analytic partial derivative of the log-density with respect to one parameter.
    pub fn dlogpdf_dparam(&self, y: f64, p: MarginParams, which: MarginParamKind) -> Result<f64> {
        check_y(y)?;
        check_params(*self, p)?;
        Ok(match (self, which) {
            (MarginFamily::LogNormal, MarginParamKind::Mu) => (y.ln() - p.mu) / (p.sigma * p.sigma),
            (MarginFamily::LogNormal, MarginParamKind::Sigma) => {
                let z = (y.ln() - p.mu) / p.sigma;
                (z * z - 1.0) / p.sigma
            }
            (MarginFamily::LogLogistic, MarginParamKind::Mu) => {
                let f = logistic(p.sigma * (y.ln() - p.mu.ln()));
                (p.sigma / p.mu) * (2.0 * f - 1.0)
            }
            (MarginFamily::LogLogistic, MarginParamKind::Sigma) => {
                let t = y.ln() - p.mu.ln();
                let f = logistic(p.sigma * t);
                1.0 / p.sigma + t * (1.0 - 2.0 * f)
            }
            (MarginFamily::Gamma, MarginParamKind::Mu) => y / (p.mu * p.mu) - p.sigma / p.mu,
            (MarginFamily::Gamma, MarginParamKind::Sigma) => y.ln() - p.mu.ln() - digamma(p.sigma),
            (MarginFamily::Weibull, MarginParamKind::Mu) => {
                let w = (p.sigma * (y.ln() - p.mu.ln())).exp();
                (p.sigma / p.mu) * (w - 1.0)
            }
            (MarginFamily::Weibull, MarginParamKind::Sigma) => {
                let t = y.ln() - p.mu.ln();
                let w = (p.sigma * t).exp();
                1.0 / p.sigma + t * (1.0 - w)
            }
        })
    }

    /// Analytic partial derivative of the CDF with respect to one parameter.
    pub fn dcdf_dparam(&self, y: f64, p: MarginParams, which: MarginParamKind) -> Result<f64> {
        check_y(y)?;
        check_params(*self, p)?;
        Ok(match (self, which) {
            (MarginFamily::LogNormal, MarginParamKind::Mu) => {
                let z = (y.ln() - p.mu) / p.sigma;
                -norm_pdf(z) / p.sigma
            }
            (MarginFamily::LogNormal, MarginParamKind::Sigma) => {
                let z = (y.ln() - p.mu) / p.sigma;
                -norm_pdf(z) * z / p.sigma
            }
            (MarginFamily::LogLogistic, MarginParamKind::Mu) => {
                let f = logistic(p.sigma * (y.ln() - p.mu.ln()));
                -(p.sigma / p.mu) * f * (1.0 - f)
            }
            (MarginFamily::LogLogistic, MarginParamKind::Sigma) => {
                let t = y.ln() - p.mu.ln();
                let f = logistic(p.sigma * t);
                t * f * (1.0 - f)
            }
            (MarginFamily::Gamma, MarginParamKind::Mu) => {
                let x = y / p.mu;
                let std_density = ((p.sigma - 1.0) * x.ln() - x - ln_gamma(p.sigma)).exp();
                -(y / (p.mu * p.mu)) * std_density
            }
            (MarginFamily::Gamma, MarginParamKind::Sigma) => {
                numeric::reg_lower_gamma_da(p.sigma, y / p.mu)
            }
            (MarginFamily::Weibull, MarginParamKind::Mu) => {
                let w = (p.sigma * (y.ln() - p.mu.ln())).exp();
                -(p.sigma / p.mu) * w * (-w).exp()
            }
            (MarginFamily::Weibull, MarginParamKind::Sigma) => {
                let t = y.ln() - p.mu.ln();
                let w = (p.sigma * t).exp();
                w * (-w).exp() * t
            }
        })
    }

    /// E(Y). Errors when the mean does not exist (Log-Logistic sigma <= 1).
    pub fn mean(&self, p: MarginParams) -> Result<f64> {
        check_params(*self, p)?;
        match self {
            MarginFamily::LogNormal => Ok((p.mu + 0.5 * p.sigma * p.sigma).exp()),
            MarginFamily::LogLogistic => {
                if p.sigma <= 1.0 {
                    return Err(Error::UndefinedMoment(format!(
                        "log_logistic mean requires sigma > 1, got {}",
                        p.sigma
                    )));
                }
                let b = std::f64::consts::PI / p.sigma;
                Ok(p.mu * b / b.sin())
            }
            MarginFamily::Gamma => Ok(p.sigma * p.mu),
            MarginFamily::Weibull => Ok(p.mu * (ln_gamma(1.0 + 1.0 / p.sigma)).exp()),
        }
    }

    /// Quantile function F^{-1}(u). Closed form except for the Gamma family,
    /// which uses a bracketed Newton iteration on the CDF.
    pub fn quantile(&self, u: f64, p: MarginParams) -> Result<f64> {
        check_params(*self, p)?;
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::domain(format!("quantile level must lie in (0,1), got {u}")));
        }
        match self {
            MarginFamily::LogNormal => Ok((p.mu + p.sigma * norm_quantile(u)).exp()),
            MarginFamily::LogLogistic => Ok(p.mu * (u / (1.0 - u)).powf(1.0 / p.sigma)),
            MarginFamily::Weibull => Ok(p.mu * (-(-u).ln_1p()).powf(1.0 / p.sigma)),
            MarginFamily::Gamma => gamma_quantile(u, p),
        }
    }

    /// Draw `n` i.i.d. responses.
    pub fn sample<R: Rng + ?Sized>(&self, p: MarginParams, n: usize, rng: &mut R) -> Result<Vec<f64>> {
        check_params(*self, p)?;
        let mut out = Vec::with_capacity(n);
        match self {
            MarginFamily::LogNormal => {
                let normal = rand_distr::StandardNormal;
                for _ in 0..n {
                    let z: f64 = normal.sample(rng);
                    out.push((p.mu + p.sigma * z).exp());
                }
            }
            MarginFamily::Gamma => {
                let gamma = rand_distr::Gamma::new(p.sigma, p.mu)
                    .map_err(|e| Error::domain(format!("gamma sampler: {e}")))?;
                for _ in 0..n {
                    out.push(gamma.sample(rng));
                }
            }
            // Inverse-CDF sampling: closed-form quantiles.
            MarginFamily::LogLogistic | MarginFamily::Weibull => {
                for _ in 0..n {
                    let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
                    out.push(self.quantile(u, p)?);
                }
            }
        }
        Ok(out)
    }

    /// Response map for `mu`: identity for the Log-Normal location, `exp`
    /// (clamped against overflow) for the positive-scale families.
    pub fn response_mu(&self, eta: f64) -> f64 {
        match self {
            MarginFamily::LogNormal => eta,
            _ => eta.clamp(-ETA_CLAMP, ETA_CLAMP).exp(),
        }
    }

    /// d(mu)/d(eta) of the response map.
    pub fn d_response_mu(&self, eta: f64) -> f64 {
        match self {
            MarginFamily::LogNormal => 1.0,
            _ => eta.clamp(-ETA_CLAMP, ETA_CLAMP).exp(),
        }
    }

    /// Inverse of [`MarginFamily::response_mu`].
    pub fn link_mu(&self, mu: f64) -> Result<f64> {
        match self {
            MarginFamily::LogNormal => Ok(mu),
            _ => {
                if mu <= 0.0 {
                    return Err(Error::domain(format!("log link needs a positive parameter, got {mu}")));
                }
                Ok(mu.ln())
            }
        }
    }

    /// Response map for `sigma` (always `exp`, clamped against overflow).
    pub fn response_sigma(&self, eta: f64) -> f64 {
        eta.clamp(-ETA_CLAMP, ETA_CLAMP).exp()
    }

    /// d(sigma)/d(eta) of the response map.
    pub fn d_response_sigma(&self, eta: f64) -> f64 {
        eta.clamp(-ETA_CLAMP, ETA_CLAMP).exp()
    }

    /// Inverse of [`MarginFamily::response_sigma`].
    pub fn link_sigma(&self, sigma: f64) -> Result<f64> {
        if sigma <= 0.0 {
            return Err(Error::domain(format!("log link needs a positive parameter, got {sigma}")));
        }
        Ok(sigma.ln())
    }

    /// Parameters obtained by mapping a link-scale pair through the responses.
    pub fn params_from_eta(&self, eta_mu: f64, eta_sigma: f64) -> MarginParams {
        MarginParams::new(self.response_mu(eta_mu), self.response_sigma(eta_sigma))
    }
}

/// Gamma quantile by bracketed Newton refinement of a Wilson-Hilferty start.
fn gamma_quantile(u: f64, p: MarginParams) -> Result<f64> {
    let family = MarginFamily::Gamma;
    // Wilson-Hilferty approximation for the standard gamma, then rescale.
    let a = p.sigma;
    let z = norm_quantile(u);
    let c = 1.0 - 1.0 / (9.0 * a) + z / (3.0 * a.sqrt());
    let mut y = (a * c.powi(3)).max(1e-300) * p.mu;

    // Establish a bracket around the root of F(y) - u.
    let (mut lo, mut hi) = (y, y);
    let f = |t: f64| family.cdf(t, p).unwrap() - u;
    let mut flo = f(lo);
    let mut fhi = flo;
    let mut grow = 2.0;
    while flo > 0.0 {
        lo /= grow;
        flo = f(lo);
        grow *= 2.0;
        if lo < 1e-300 {
            break;
        }
    }
    grow = 2.0;
    while fhi < 0.0 {
        hi *= grow;
        fhi = f(hi);
        grow *= 2.0;
        if hi > 1e300 {
            break;
        }
    }

    // Newton with bisection safeguarding.
    y = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fy = f(y);
        if fy > 0.0 {
            hi = y;
        } else {
            lo = y;
        }
        let pdf = family.log_pdf(y, p).unwrap().exp();
        let mut next = if pdf > 0.0 { y - fy / pdf } else { 0.5 * (lo + hi) };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - y).abs() <= 1e-14 * y.abs().max(1e-300) {
            y = next;
            break;
        }
        y = next;
    }
    Ok(y)
}

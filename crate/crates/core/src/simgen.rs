//! Synthetic data generation for benchmarking the boosting engine:
//! uniform covariates, fixed true predictor functions, and response draws
//! through the copula and marginal quantile transforms.
//!
//! The first response is Log-Normal and the second Log-Logistic. Two truth
//! configurations exist: a nonlinear design with smooth effects of x1..x4 and
//! an exclusively linear design used for convergence checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::copulas::{clamp_unit, CopulaFamily};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::margins::MarginFamily;
use crate::mle::LinearModelTerms;

/// True linear coefficients (beta_1..beta_7) of the linear design.
pub const LINEAR_TRUTH_COEFFICIENTS: [f64; 7] = [-1.0, 0.5, -0.7, 0.3, 0.7, 0.5, 1.0];

/// Shape of the true predictor functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruthKind {
    /// Smooth effects: cosine, damped exponential, sine and log-sine terms.
    Nonlinear,
    /// Linear effects only.
    Linear,
}

/// Whether responses follow the scenario copula or are independent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dependence {
    /// Dependence parameter driven by the truth predictor through the
    /// scenario copula's response function.
    FromTruth,
    /// Responses drawn independently (the copula still names the model that
    /// will be fitted to the data).
    Independent,
}

/// A simulation scenario.
#[derive(Debug, Clone, Copy)]
pub struct Scenario {
    pub n: usize,
    /// Number of covariates (at least 4; x1..x4 are informative).
    pub p: usize,
    pub copula: CopulaFamily,
    pub truth: TruthKind,
    pub dependence: Dependence,
    pub seed: u64,
}

/// The five link-scale truth predictors of the nonlinear design, in the
/// order mu1, sigma1, mu2, sigma2, theta.
pub fn truth_nonlinear(x: &[f64]) -> [f64; 5] {
    let pi = std::f64::consts::PI;
    [
        -0.75 * x[0] + 0.5 * (pi * x[2]).cos(),
        -0.7 + 0.5 * (pi * x[2]).sin(),
        0.5 - 0.7 * x[0] - 0.02 * (2.0 * (x[1] + 1.0)).exp(),
        2.0 + 0.5 * x[1],
        -0.8 + 1.5 * (4.5 - 1.7 * (pi * x[3]).sin()).ln(),
    ]
}

/// The five link-scale truth predictors of the linear design.
pub fn truth_linear(x: &[f64]) -> [f64; 5] {
    let b = LINEAR_TRUTH_COEFFICIENTS;
    [
        b[0] * x[0] + b[1] * x[2],
        -0.7 + b[4] * x[2],
        0.5 + b[2] * x[0] + b[3] * x[1],
        2.0 + b[5] * x[1],
        1.0 + b[6] * x[3],
    ]
}

/// Covariate index sets entering each parameter predictor in the linear
/// design (mirrors [`truth_linear`]); slopes ordered as beta_1..beta_7.
pub fn linear_truth_terms() -> LinearModelTerms {
    LinearModelTerms {
        terms: [vec![0, 2], vec![2], vec![0, 1], vec![1], vec![3]],
    }
}

/// Per-parameter informative covariate indices of the nonlinear design.
pub fn nonlinear_informative() -> [Vec<usize>; 5] {
    [vec![0, 2], vec![2], vec![0, 1], vec![1], vec![3]]
}

fn truth_etas(kind: TruthKind, x: &[f64]) -> [f64; 5] {
    match kind {
        TruthKind::Nonlinear => truth_nonlinear(x),
        TruthKind::Linear => truth_linear(x),
    }
}

/// Generates a dataset from a scenario: covariates i.i.d. Uniform(-1, 1),
/// responses drawn by copula sampling and marginal quantile transforms.
pub fn generate(scenario: &Scenario) -> Result<Dataset> {
    if scenario.p < 4 {
        return Err(Error::Config(format!(
            "scenario needs at least 4 covariates, got {}",
            scenario.p
        )));
    }
    if scenario.n == 0 {
        return Err(Error::Config("scenario with zero observations".into()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(scenario.seed);
    let (m1, m2) = (MarginFamily::LogNormal, MarginFamily::LogLogistic);

    let n = scenario.n;
    let p = scenario.p;
    let mut covariates = vec![Vec::with_capacity(n); p];
    let mut y1 = Vec::with_capacity(n);
    let mut y2 = Vec::with_capacity(n);
    let mut row = vec![0.0; p];

    for _ in 0..n {
        for (j, v) in row.iter_mut().enumerate() {
            *v = rng.random_range(-1.0..1.0);
            covariates[j].push(*v);
        }
        let etas = truth_etas(scenario.truth, &row);
        let p1 = m1.params_from_eta(etas[0], etas[1]);
        let p2 = m2.params_from_eta(etas[2], etas[3]);
        let (u1, u2) = match scenario.dependence {
            Dependence::Independent => (
                rng.random_range(0.0..1.0f64),
                rng.random_range(0.0..1.0f64),
            ),
            Dependence::FromTruth => {
                let theta = scenario.copula.response(etas[4]);
                scenario.copula.sample_pair(theta, 1, &mut rng)?[0]
            }
        };
        y1.push(m1.quantile(clamp_unit(u1), p1)?);
        y2.push(m2.quantile(clamp_unit(u2), p2)?);
    }

    let names = (1..=p).map(|j| format!("x{j}")).collect();
    Dataset::new(y1, y2, covariates, names)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn nonlinear_truth_reference_values() {
        let zeros = [0.0; 4];
        let etas = truth_nonlinear(&zeros);
        assert_relative_eq!(etas[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(etas[1], -0.7, epsilon = 1e-15);
        assert_relative_eq!(etas[2], 0.5 - 0.02 * 2.0f64.exp(), epsilon = 1e-15);
        assert_relative_eq!(etas[3], 2.0, epsilon = 1e-15);
        assert_relative_eq!(etas[4], -0.8 + 1.5 * 4.5f64.ln(), epsilon = 1e-15);

        // eta_mu1 at x1 = 1, x3 = 0: -0.75 + 0.5
        let etas = truth_nonlinear(&[1.0, 0.0, 0.0, 0.0]);
        assert_relative_eq!(etas[0], -0.25, epsilon = 1e-15);

        // eta_sigma2 depends only on x2
        let a = truth_nonlinear(&[0.3, 0.4, -0.2, 0.9])[3];
        let b = truth_nonlinear(&[-0.8, 0.4, 0.6, -0.1])[3];
        assert_eq!(a, b);
    }

    #[test]
    fn linear_truth_reference_values() {
        let etas = truth_linear(&[0.0; 4]);
        assert_eq!(etas[0], 0.0);
        assert_eq!(etas[1], -0.7);
        assert_eq!(etas[2], 0.5);
        assert_eq!(etas[3], 2.0);
        assert_eq!(etas[4], 1.0);

        // theta at x4 = 0 under the Gaussian response: tanh(1)
        let theta = CopulaFamily::Gaussian.response(etas[4]);
        assert_relative_eq!(theta, 0.7616, epsilon = 1e-4);

        // linearity of the centered predictors
        let x = [0.3, -0.5, 0.8, 0.1];
        let x2: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let base = truth_linear(&[0.0; 4]);
        let at_x = truth_linear(&x);
        let at_2x = truth_linear(&x2);
        for k in 0..5 {
            assert_relative_eq!(
                at_2x[k] - base[k],
                2.0 * (at_x[k] - base[k]),
                epsilon = 1e-12
            );
        }
    }

    /// The truth dependence predictor maps into every copula's open domain.
    #[test]
    fn truth_theta_stays_in_domain() {
        for kind in [TruthKind::Nonlinear, TruthKind::Linear] {
            let mut eta_min = f64::INFINITY;
            let mut eta_max = f64::NEG_INFINITY;
            for i in 0..=2000 {
                let x4 = -1.0 + i as f64 / 1000.0;
                let eta = truth_etas(kind, &[0.0, 0.0, 0.0, x4])[4];
                eta_min = eta_min.min(eta);
                eta_max = eta_max.max(eta);
            }
            for copula in CopulaFamily::ALL {
                for eta in [eta_min, eta_max] {
                    let theta = copula.response(eta);
                    copula.check_theta(theta).unwrap();
                }
            }
        }
    }

    #[test]
    fn generation_is_reproducible() {
        let scenario = Scenario {
            n: 50,
            p: 5,
            copula: CopulaFamily::Clayton,
            truth: TruthKind::Nonlinear,
            dependence: Dependence::FromTruth,
            seed: 9,
        };
        let a = generate(&scenario).unwrap();
        let b = generate(&scenario).unwrap();
        assert_eq!(a.y1, b.y1);
        assert_eq!(a.y2, b.y2);
        assert_eq!(a.covariates, b.covariates);
        assert_eq!(a.n(), 50);
        assert_eq!(a.p(), 5);
    }

    #[test]
    fn independent_scenario_has_null_rank_correlation() {
        let scenario = Scenario {
            n: 10_000,
            p: 4,
            copula: CopulaFamily::Gaussian,
            truth: TruthKind::Nonlinear,
            dependence: Dependence::Independent,
            seed: 10,
        };
        let data = generate(&scenario).unwrap();
        // Remove the covariate signal via the probability-integral transform
        // before checking rank independence of the uniforms.
        let m1 = MarginFamily::LogNormal;
        let m2 = MarginFamily::LogLogistic;
        let mut u1 = Vec::with_capacity(data.n());
        let mut u2 = Vec::with_capacity(data.n());
        for i in 0..data.n() {
            let x: Vec<f64> = (0..4).map(|j| data.covariates[j][i]).collect();
            let etas = truth_nonlinear(&x);
            u1.push(m1.cdf(data.y1[i], m1.params_from_eta(etas[0], etas[1])).unwrap());
            u2.push(m2.cdf(data.y2[i], m2.params_from_eta(etas[2], etas[3])).unwrap());
        }
        let tau = crate::numeric::kendall_tau_empirical(&u1, &u2);
        assert!(tau.abs() < 0.03, "tau {tau}");
    }

    /// Conditional draws at a fixed covariate value reproduce the Kendall's
    /// tau implied by the truth predictor (quantile transforms preserve
    /// concordance).
    #[test]
    fn conditional_tau_matches_truth() {
        use rand::SeedableRng;
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let etas = truth_nonlinear(&[0.0; 4]);
        for copula in CopulaFamily::ALL {
            let theta = copula.response(etas[4]);
            let pairs = copula.sample_pair(theta, 10_000, &mut rng).unwrap();
            let m1 = MarginFamily::LogNormal;
            let m2 = MarginFamily::LogLogistic;
            let p1 = m1.params_from_eta(etas[0], etas[1]);
            let p2 = m2.params_from_eta(etas[2], etas[3]);
            let y1: Vec<f64> = pairs.iter().map(|(a, _)| m1.quantile(*a, p1).unwrap()).collect();
            let y2: Vec<f64> = pairs.iter().map(|(_, b)| m2.quantile(*b, p2).unwrap()).collect();
            let tau_hat = crate::numeric::kendall_tau_empirical(&y1, &y2);
            let tau = copula.kendall_tau(theta).unwrap();
            assert!(
                (tau_hat - tau).abs() < 0.03,
                "{copula:?}: tau_hat {tau_hat} vs {tau}"
            );
        }
    }

    /// Probability-integral transforms of generated responses are uniform
    /// (Kolmogorov-Smirnov at n = 10000).
    #[test]
    fn generated_margins_pass_ks() {
        for copula in CopulaFamily::ALL {
            let scenario = Scenario {
                n: 10_000,
                p: 4,
                copula,
                truth: TruthKind::Nonlinear,
                dependence: Dependence::FromTruth,
                seed: 21,
            };
            let data = generate(&scenario).unwrap();
            for (resp, family, lo_idx) in [
                (&data.y1, MarginFamily::LogNormal, 0usize),
                (&data.y2, MarginFamily::LogLogistic, 2),
            ] {
                let mut u: Vec<f64> = (0..data.n())
                    .map(|i| {
                        let x: Vec<f64> = (0..4).map(|j| data.covariates[j][i]).collect();
                        let etas = truth_nonlinear(&x);
                        let p = family.params_from_eta(etas[lo_idx], etas[lo_idx + 1]);
                        family.cdf(resp[i], p).unwrap()
                    })
                    .collect();
                u.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let n = u.len();
                let mut ks: f64 = 0.0;
                for (i, v) in u.iter().enumerate() {
                    ks = ks.max((v - i as f64 / n as f64).abs());
                    ks = ks.max((v - (i + 1) as f64 / n as f64).abs());
                }
                assert!(ks < 1.5 / (n as f64).sqrt(), "{copula:?} {family:?}: KS {ks}");
            }
        }
    }

    #[test]
    fn scenario_validation() {
        let mut scenario = Scenario {
            n: 10,
            p: 3,
            copula: CopulaFamily::Gaussian,
            truth: TruthKind::Nonlinear,
            dependence: Dependence::FromTruth,
            seed: 0,
        };
        assert!(generate(&scenario).is_err());
        scenario.p = 4;
        scenario.n = 0;
        assert!(generate(&scenario).is_err());
    }
}

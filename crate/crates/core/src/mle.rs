//! Direct maximum-likelihood fits by quasi-Newton minimization of the joint
//! negative log-likelihood.
//!
//! Two entry points: an intercept-only marginal fit used to initialize
//! predictor offsets, and a fully linear joint model (per-parameter intercept
//! plus named linear covariate effects) that serves as the convergence
//! reference for the boosting engine.

use nalgebra::DVector;

use crate::boost::{ModelParam, ModelSpec};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::margins::MarginFamily;
use crate::numeric::{self, minimize_bfgs, BfgsOptions};

/// Link-scale intercept-only maximum-likelihood estimate (eta_mu, eta_sigma)
/// for one marginal family.
pub fn intercept_only_ml(family: MarginFamily, y: &[f64]) -> Result<(f64, f64)> {
    if y.is_empty() {
        return Err(Error::Data("cannot estimate a margin from zero observations".into()));
    }
    let start = moment_start(family, y);
    let fg = |x: &DVector<f64>| {
        let p = family.params_from_eta(x[0], x[1]);
        let mut nll = 0.0;
        let mut g = DVector::<f64>::zeros(2);
        for &v in y {
            match family.log_pdf(v, p) {
                Ok(l) if l.is_finite() => nll -= l,
                _ => return (f64::INFINITY, DVector::zeros(2)),
            }
            let dmu = family
                .dlogpdf_dparam(v, p, crate::margins::MarginParamKind::Mu)
                .unwrap_or(f64::NAN);
            let dsg = family
                .dlogpdf_dparam(v, p, crate::margins::MarginParamKind::Sigma)
                .unwrap_or(f64::NAN);
            g[0] -= dmu * family.d_response_mu(x[0]);
            g[1] -= dsg * family.d_response_sigma(x[1]);
        }
        if !g[0].is_finite() || !g[1].is_finite() {
            return (f64::INFINITY, DVector::zeros(2));
        }
        (nll, g)
    };
    let opts = BfgsOptions {
        max_iter: 200,
        grad_tol: 1e-8 * y.len() as f64,
        f_tol: 1e-15,
    };
    let (x, _) = minimize_bfgs(fg, DVector::from_vec(vec![start.0, start.1]), &opts)?;
    Ok((x[0], x[1]))
}

/// Moment-based link-scale starting values.
fn moment_start(family: MarginFamily, y: &[f64]) -> (f64, f64) {
    let n = y.len() as f64;
    let logs: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let log_mean = logs.iter().sum::<f64>() / n;
    let log_var = logs.iter().map(|l| (l - log_mean).powi(2)).sum::<f64>() / n;
    let log_sd = log_var.sqrt().max(1e-3);
    match family {
        MarginFamily::LogNormal => (log_mean, log_sd.ln()),
        MarginFamily::LogLogistic => {
            // log-scale logistic: sd = pi / (sigma sqrt(3))
            let sigma = std::f64::consts::PI / (log_sd * 3.0f64.sqrt());
            (numeric::median(y).ln(), sigma.ln())
        }
        MarginFamily::Gamma => {
            let mean = y.iter().sum::<f64>() / n;
            let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let var = var.max(1e-12 * mean * mean);
            ((var / mean).ln(), (mean * mean / var).ln())
        }
        MarginFamily::Weibull => {
            // log-scale Gumbel: sd = pi / (sigma sqrt(6)), mean = ln mu - gamma/sigma
            const EULER_GAMMA: f64 = 0.5772156649015329;
            let sigma = std::f64::consts::PI / (log_sd * 6.0f64.sqrt());
            (log_mean + EULER_GAMMA / sigma, sigma.ln())
        }
    }
}

/// Linear-effect structure of a joint maximum-likelihood fit: covariate
/// indices entering each of the five parameter predictors.
#[derive(Debug, Clone, Default)]
pub struct LinearModelTerms {
    pub terms: [Vec<usize>; 5],
}

/// A converged joint linear maximum-likelihood fit.
#[derive(Debug, Clone)]
pub struct LinearMlFit {
    pub intercepts: [f64; 5],
    /// Per parameter, slope estimates parallel to `LinearModelTerms::terms`.
    pub coefficients: [Vec<f64>; 5],
    pub neg_log_lik: f64,
}

impl LinearMlFit {
    /// Link-scale predictor values implied by the fit.
    pub fn etas(&self, terms: &LinearModelTerms, data: &Dataset) -> Vec<Vec<f64>> {
        let n = data.n();
        let mut etas = Vec::with_capacity(5);
        for k in 0..5 {
            let mut e = vec![self.intercepts[k]; n];
            for (t, &j) in terms.terms[k].iter().enumerate() {
                let beta = self.coefficients[k][t];
                for (ei, x) in e.iter_mut().zip(&data.covariates[j]) {
                    *ei += beta * x;
                }
            }
            etas.push(e);
        }
        etas
    }
}

/// Maximizes the joint log-likelihood over all intercepts and linear slopes
/// by BFGS with analytic gradients (per-predictor chain rule contracted with
/// the covariate columns).
pub fn fit_linear_ml(spec: &ModelSpec, data: &Dataset, terms: &LinearModelTerms) -> Result<LinearMlFit> {
    let n = data.n();
    let n_slopes: usize = terms.terms.iter().map(|t| t.len()).sum();
    let dim = 5 + n_slopes;

    let unpack = |x: &DVector<f64>| -> (Vec<f64>, Vec<Vec<f64>>) {
        let intercepts: Vec<f64> = (0..5).map(|k| x[k]).collect();
        let mut slopes = Vec::with_capacity(5);
        let mut pos = 5;
        for k in 0..5 {
            let len = terms.terms[k].len();
            slopes.push((0..len).map(|t| x[pos + t]).collect());
            pos += len;
        }
        (intercepts, slopes)
    };

    let build_etas = |x: &DVector<f64>| -> Vec<Vec<f64>> {
        let (intercepts, slopes) = unpack(x);
        let mut etas = Vec::with_capacity(5);
        for k in 0..5 {
            let mut e = vec![intercepts[k]; n];
            for (t, &j) in terms.terms[k].iter().enumerate() {
                let beta: f64 = slopes[k][t];
                for (ei, xv) in e.iter_mut().zip(&data.covariates[j]) {
                    *ei += beta * xv;
                }
            }
            etas.push(e);
        }
        etas
    };

    let fg = |x: &DVector<f64>| {
        let etas = build_etas(x);
        let nll = match spec.neg_log_lik(&etas, data) {
            Ok(v) if v.is_finite() => v,
            _ => return (f64::INFINITY, DVector::zeros(dim)),
        };
        let mut g = DVector::zeros(dim);
        let mut pos = 5;
        for k in 0..5 {
            let Ok(neg_grad) = spec.negative_gradient(&etas, data, ModelParam::from_index(k)) else {
                return (f64::INFINITY, DVector::zeros(dim));
            };
            // d nll / d eta_k[i] = -neg_grad[i]
            g[k] = -neg_grad.iter().sum::<f64>();
            for (t, &j) in terms.terms[k].iter().enumerate() {
                g[pos + t] = -neg_grad
                    .iter()
                    .zip(&data.covariates[j])
                    .map(|(gi, xi)| gi * xi)
                    .sum::<f64>();
            }
            pos += terms.terms[k].len();
        }
        (nll, g)
    };

    // Start from intercept-only estimates with zero slopes.
    let objective = crate::boost::CopulaObjective { spec: *spec };
    let offsets =
        crate::boost::Objective::offsets(&objective, data, crate::boost::OffsetMode::MaximumLikelihood)?;
    let mut x0 = DVector::zeros(dim);
    for k in 0..5 {
        x0[k] = offsets[k];
    }

    let opts = BfgsOptions {
        max_iter: 600,
        grad_tol: 1e-7 * n as f64,
        f_tol: 1e-15,
    };
    let (x, nll) = minimize_bfgs(fg, x0, &opts)?;
    if !nll.is_finite() {
        return Err(Error::Optimization("linear ML fit diverged".into()));
    }
    let (intercepts, slopes) = unpack(&x);
    Ok(LinearMlFit {
        intercepts: intercepts.try_into().expect("five intercepts"),
        coefficients: slopes.try_into().expect("five slope groups"),
        neg_log_lik: nll,
    })
}

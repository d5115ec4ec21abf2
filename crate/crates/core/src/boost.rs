//! Noncyclic component-wise gradient boosting for the joint copula
//! negative log-likelihood.
//!
//! The loss is the negative of
//! `sum_i [ log c(F1(y1i), F2(y2i); theta_i) + log f1(y1i) + log f2(y2i) ]`
//! with every distribution parameter obtained from its own additive predictor
//! through the family's response function. Per iteration, each predictor's
//! negative gradient is (optionally stabilized and) fitted by all of that
//! predictor's base-learners; the best learner per predictor is kept by the
//! residual-sum-of-squares criterion, candidate risks after a step-scaled
//! update are compared across predictors, and only the predictor with the
//! lowest candidate risk is updated. Ties break by the fixed parameter order
//! (mu1, sigma1, mu2, sigma2, theta) and then by the lowest covariate index,
//! so fits are deterministic.
//!
//! A univariate variant with the two marginal parameters as its predictor set
//! fits one response alone; two such fits combine into an independence model
//! (a product copula) for comparisons against the joint fit.

use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselearners::LearnerSet;
use crate::copulas::{clamp_unit, CopulaArg, CopulaFamily};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::margins::{MarginFamily, MarginParamKind, MarginParams};
use crate::mle;
use crate::numeric;

/// Minimum number of learners before per-learner fits run on the thread pool.
const PARALLEL_LEARNER_THRESHOLD: usize = 64;

/// The five model parameters of a bivariate copula regression, in update-order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelParam {
    Mu1,
    Sigma1,
    Mu2,
    Sigma2,
    Theta,
}

impl ModelParam {
    pub const ALL: [ModelParam; 5] = [
        ModelParam::Mu1,
        ModelParam::Sigma1,
        ModelParam::Mu2,
        ModelParam::Sigma2,
        ModelParam::Theta,
    ];

    pub fn index(&self) -> usize {
        match self {
            ModelParam::Mu1 => 0,
            ModelParam::Sigma1 => 1,
            ModelParam::Mu2 => 2,
            ModelParam::Sigma2 => 3,
            ModelParam::Theta => 4,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ModelParam::Mu1 => "mu1",
            ModelParam::Sigma1 => "sigma1",
            ModelParam::Mu2 => "mu2",
            ModelParam::Sigma2 => "sigma2",
            ModelParam::Theta => "theta",
        }
    }

    pub fn from_index(k: usize) -> ModelParam {
        ModelParam::ALL[k]
    }
}

/// Which response a univariate marginal fit models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseIndex {
    First,
    Second,
}

/// Family choices of a bivariate copula regression model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub margin1: MarginFamily,
    pub margin2: MarginFamily,
    pub copula: CopulaFamily,
}

/// Gradient rescaling applied before base-learner fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stabilization {
    None,
    Mad,
}

/// Offset initialization of the additive predictors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OffsetMode {
    /// Link of the family's intercept-only maximum-likelihood estimate; the
    /// copula offset maps the empirical Kendall's tau through the tau inverse.
    MaximumLikelihood,
    /// All offsets zero (the literal algorithm initialization).
    Zero,
}

/// Boosting hyperparameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BoostConfig {
    /// Step length in (0, 1].
    pub step_length: f64,
    /// Number of boosting iterations.
    pub m_stop: usize,
    pub stabilization: Stabilization,
    pub offsets: OffsetMode,
    /// Master seed recorded for reproducibility (the fit itself is
    /// deterministic; tuners derive fold permutations from this).
    pub seed: u64,
    /// Optional early exit: stop once the best candidate improves the mean
    /// risk by less than this amount (used for run-to-convergence fits).
    pub convergence_tol: Option<f64>,
}

impl Default for BoostConfig {
    fn default() -> Self {
        BoostConfig {
            step_length: 0.01,
            m_stop: 100,
            stabilization: Stabilization::None,
            offsets: OffsetMode::MaximumLikelihood,
            seed: 0,
            convergence_tol: None,
        }
    }
}

/// Accumulated state of one additive predictor.
#[derive(Debug, Clone)]
pub struct PredictorState {
    /// Index into the objective's parameter list.
    pub param_index: usize,
    pub offset: f64,
    /// Per-covariate accumulated coefficient vectors (None = never selected).
    pub coefficients: Vec<Option<DVector<f64>>>,
    /// Current predictor values on the training rows.
    pub eta: Vec<f64>,
}

impl PredictorState {
    /// Covariates with a non-empty accumulated contribution.
    pub fn selected_covariates(&self) -> Vec<usize> {
        self.coefficients
            .iter()
            .enumerate()
            .filter_map(|(j, c)| c.as_ref().map(|_| j))
            .collect()
    }

    /// Recomputes eta from the offset and accumulated coefficients; the
    /// incrementally tracked eta must match this within tight tolerance.
    pub fn recompute_eta(&self, learners: &LearnerSet, data: &Dataset) -> Vec<f64> {
        let mut eta = vec![self.offset; data.n()];
        for (j, coef) in self.coefficients.iter().enumerate() {
            if let Some(c) = coef {
                let contrib = learners.learners[j].predict(c, &data.covariates[j]);
                for (e, v) in eta.iter_mut().zip(contrib) {
                    *e += v;
                }
            }
        }
        eta
    }

    /// Predictor values on new covariate columns.
    pub fn predict_eta(&self, learners: &LearnerSet, covariates: &[Vec<f64>]) -> Vec<f64> {
        let n = covariates.first().map_or(0, |c| c.len());
        let mut eta = vec![self.offset; n];
        for (j, coef) in self.coefficients.iter().enumerate() {
            if let Some(c) = coef {
                let contrib = learners.learners[j].predict(c, &covariates[j]);
                for (e, v) in eta.iter_mut().zip(contrib) {
                    *e += v;
                }
            }
        }
        eta
    }
}

/// One boosting update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub iteration: usize,
    /// Index into the objective's parameter list.
    pub param: usize,
    pub covariate: usize,
    /// Decrease of the mean in-sample risk achieved by this update.
    pub loss_reduction: f64,
}

/// Outcome of a boosting run over a generic objective.
#[derive(Debug, Clone)]
pub(crate) struct EngineResult {
    pub states: Vec<PredictorState>,
    pub selection_log: Vec<SelectionRecord>,
    /// Mean in-sample risk after 0..=iterations updates.
    pub risk_path: Vec<f64>,
    pub validation_risk_path: Option<Vec<f64>>,
}

/// Per-iteration view of the loss at the current predictor state.
pub(crate) trait StepEvaluator {
    /// Current total negative log-likelihood (sum over observations).
    fn nll(&self) -> f64;
    /// Negative gradient of the loss w.r.t. predictor `k`, one entry per
    /// observation; `None` when any coordinate is non-finite.
    fn neg_gradient(&self, k: usize) -> Option<Vec<f64>>;
    /// Total risk after the candidate update eta_k += s * increment.
    fn candidate_nll(&self, k: usize, increment: &[f64], s: f64) -> f64;
}

/// A boostable loss over a set of additive predictors.
pub(crate) trait Objective: Sync {
    fn n_params(&self) -> usize;
    fn offsets(&self, data: &Dataset, mode: OffsetMode) -> Result<Vec<f64>>;
    fn nll(&self, etas: &[Vec<f64>], data: &Dataset) -> f64;
    fn evaluator<'a>(&'a self, etas: &'a [Vec<f64>], data: &'a Dataset)
        -> Box<dyn StepEvaluator + 'a>;
}

fn or_nan(r: Result<f64>) -> f64 {
    r.unwrap_or(f64::NAN)
}

// ---------------------------------------------------------------------------
// Bivariate copula objective
// ---------------------------------------------------------------------------

pub(crate) struct CopulaObjective {
    pub spec: ModelSpec,
}

struct CopulaEvaluator<'a> {
    spec: ModelSpec,
    data: &'a Dataset,
    etas: &'a [Vec<f64>],
    p1: Vec<MarginParams>,
    p2: Vec<MarginParams>,
    theta: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
    logf1: Vec<f64>,
    logf2: Vec<f64>,
    logc: Vec<f64>,
    nll: f64,
}

impl<'a> CopulaEvaluator<'a> {
    fn new(spec: ModelSpec, etas: &'a [Vec<f64>], data: &'a Dataset) -> Self {
        let n = data.n();
        let mut ev = CopulaEvaluator {
            spec,
            data,
            etas,
            p1: Vec::with_capacity(n),
            p2: Vec::with_capacity(n),
            theta: Vec::with_capacity(n),
            u1: Vec::with_capacity(n),
            u2: Vec::with_capacity(n),
            logf1: Vec::with_capacity(n),
            logf2: Vec::with_capacity(n),
            logc: Vec::with_capacity(n),
            nll: 0.0,
        };
        let (m1, m2, cop) = (spec.margin1, spec.margin2, spec.copula);
        for i in 0..n {
            let p1 = m1.params_from_eta(etas[0][i], etas[1][i]);
            let p2 = m2.params_from_eta(etas[2][i], etas[3][i]);
            let th = cop.response(etas[4][i]);
            let y1 = data.y1[i];
            let y2 = data.y2[i];
            let lf1 = or_nan(m1.log_pdf(y1, p1));
            let lf2 = or_nan(m2.log_pdf(y2, p2));
            let u1 = clamp_unit(or_nan(m1.cdf(y1, p1)));
            let u2 = clamp_unit(or_nan(m2.cdf(y2, p2)));
            let lc = or_nan(cop.log_density(u1, u2, th));
            ev.p1.push(p1);
            ev.p2.push(p2);
            ev.theta.push(th);
            ev.u1.push(u1);
            ev.u2.push(u2);
            ev.logf1.push(lf1);
            ev.logf2.push(lf2);
            ev.logc.push(lc);
            ev.nll += -(lc + lf1 + lf2);
        }
        ev
    }

    /// Candidate risk when a margin-parameter predictor moves.
    fn margin_candidate(&self, which: ResponseIndex, kind: MarginParamKind, increment: &[f64], s: f64) -> f64 {
        let cop = self.spec.copula;
        let mut total = 0.0;
        for i in 0..self.data.n() {
            let (family, y, pold, eta_mu, eta_sigma, u_other, this_first) = match which {
                ResponseIndex::First => (
                    self.spec.margin1,
                    self.data.y1[i],
                    self.p1[i],
                    self.etas[0][i],
                    self.etas[1][i],
                    self.u2[i],
                    true,
                ),
                ResponseIndex::Second => (
                    self.spec.margin2,
                    self.data.y2[i],
                    self.p2[i],
                    self.etas[2][i],
                    self.etas[3][i],
                    self.u1[i],
                    false,
                ),
            };
            let pnew = match kind {
                MarginParamKind::Mu => MarginParams::new(
                    family.response_mu(eta_mu + s * increment[i]),
                    pold.sigma,
                ),
                MarginParamKind::Sigma => MarginParams::new(
                    pold.mu,
                    family.response_sigma(eta_sigma + s * increment[i]),
                ),
            };
            let lf = or_nan(family.log_pdf(y, pnew));
            let u = clamp_unit(or_nan(family.cdf(y, pnew)));
            let lc = if this_first {
                or_nan(cop.log_density(u, u_other, self.theta[i]))
            } else {
                or_nan(cop.log_density(u_other, u, self.theta[i]))
            };
            // summed in the fixed order logc + logf1 + logf2 so an applied
            // candidate reproduces the next iteration's fresh total bitwise
            let (lf1, lf2) = if this_first {
                (lf, self.logf2[i])
            } else {
                (self.logf1[i], lf)
            };
            total += -(lc + lf1 + lf2);
        }
        total
    }
}

impl<'a> StepEvaluator for CopulaEvaluator<'a> {
    fn nll(&self) -> f64 {
        self.nll
    }

    fn neg_gradient(&self, k: usize) -> Option<Vec<f64>> {
        let n = self.data.n();
        let mut g = Vec::with_capacity(n);
        let cop = self.spec.copula;
        for i in 0..n {
            let v = match ModelParam::from_index(k) {
                ModelParam::Mu1 | ModelParam::Sigma1 => {
                    let kind = if k == 0 { MarginParamKind::Mu } else { MarginParamKind::Sigma };
                    let m1 = self.spec.margin1;
                    let dlf = or_nan(m1.dlogpdf_dparam(self.data.y1[i], self.p1[i], kind));
                    let dcd = or_nan(m1.dcdf_dparam(self.data.y1[i], self.p1[i], kind));
                    let dlc = or_nan(cop.dlogc_du(self.u1[i], self.u2[i], self.theta[i], CopulaArg::U1));
                    let dresp = if k == 0 {
                        m1.d_response_mu(self.etas[0][i])
                    } else {
                        m1.d_response_sigma(self.etas[1][i])
                    };
                    (dlf + dlc * dcd) * dresp
                }
                ModelParam::Mu2 | ModelParam::Sigma2 => {
                    let kind = if k == 2 { MarginParamKind::Mu } else { MarginParamKind::Sigma };
                    let m2 = self.spec.margin2;
                    let dlf = or_nan(m2.dlogpdf_dparam(self.data.y2[i], self.p2[i], kind));
                    let dcd = or_nan(m2.dcdf_dparam(self.data.y2[i], self.p2[i], kind));
                    let dlc = or_nan(cop.dlogc_du(self.u1[i], self.u2[i], self.theta[i], CopulaArg::U2));
                    let dresp = if k == 2 {
                        m2.d_response_mu(self.etas[2][i])
                    } else {
                        m2.d_response_sigma(self.etas[3][i])
                    };
                    (dlf + dlc * dcd) * dresp
                }
                ModelParam::Theta => {
                    let dlc = or_nan(cop.dlogc_dtheta(self.u1[i], self.u2[i], self.theta[i]));
                    dlc * cop.d_response(self.etas[4][i])
                }
            };
            if !v.is_finite() {
                return None;
            }
            g.push(v);
        }
        Some(g)
    }

    fn candidate_nll(&self, k: usize, increment: &[f64], s: f64) -> f64 {
        match ModelParam::from_index(k) {
            ModelParam::Mu1 => self.margin_candidate(ResponseIndex::First, MarginParamKind::Mu, increment, s),
            ModelParam::Sigma1 => {
                self.margin_candidate(ResponseIndex::First, MarginParamKind::Sigma, increment, s)
            }
            ModelParam::Mu2 => self.margin_candidate(ResponseIndex::Second, MarginParamKind::Mu, increment, s),
            ModelParam::Sigma2 => {
                self.margin_candidate(ResponseIndex::Second, MarginParamKind::Sigma, increment, s)
            }
            ModelParam::Theta => {
                let cop = self.spec.copula;
                let mut total = 0.0;
                for i in 0..self.data.n() {
                    let th = cop.response(self.etas[4][i] + s * increment[i]);
                    let lc = or_nan(cop.log_density(self.u1[i], self.u2[i], th));
                    total += -(lc + self.logf1[i] + self.logf2[i]);
                }
                total
            }
        }
    }
}

impl Objective for CopulaObjective {
    fn n_params(&self) -> usize {
        5
    }

    fn offsets(&self, data: &Dataset, mode: OffsetMode) -> Result<Vec<f64>> {
        match mode {
            OffsetMode::Zero => Ok(vec![0.0; 5]),
            OffsetMode::MaximumLikelihood => {
                let (a, b) = mle::intercept_only_ml(self.spec.margin1, &data.y1)?;
                let (c, d) = mle::intercept_only_ml(self.spec.margin2, &data.y2)?;
                let tau = numeric::kendall_tau_empirical(&data.y1, &data.y2);
                let cop = self.spec.copula;
                let theta = match cop {
                    CopulaFamily::Gaussian => cop.theta_from_tau(tau.clamp(-0.99, 0.99))?,
                    CopulaFamily::Clayton | CopulaFamily::Gumbel => {
                        cop.theta_from_tau(tau.clamp(0.01, 0.95))?
                    }
                };
                Ok(vec![a, b, c, d, cop.link(theta)?])
            }
        }
    }

    fn nll(&self, etas: &[Vec<f64>], data: &Dataset) -> f64 {
        CopulaEvaluator::new(self.spec, etas, data).nll
    }

    fn evaluator<'a>(&'a self, etas: &'a [Vec<f64>], data: &'a Dataset)
        -> Box<dyn StepEvaluator + 'a> {
        Box::new(CopulaEvaluator::new(self.spec, etas, data))
    }
}

// ---------------------------------------------------------------------------
// Univariate marginal objective (used by model building and independence fits)
// ---------------------------------------------------------------------------

pub(crate) struct MarginObjective {
    pub family: MarginFamily,
    pub which: ResponseIndex,
}

impl MarginObjective {
    fn response<'a>(&self, data: &'a Dataset) -> &'a [f64] {
        match self.which {
            ResponseIndex::First => &data.y1,
            ResponseIndex::Second => &data.y2,
        }
    }
}

struct MarginEvaluator<'a> {
    family: MarginFamily,
    y: &'a [f64],
    etas: &'a [Vec<f64>],
    params: Vec<MarginParams>,
    nll: f64,
}

impl<'a> StepEvaluator for MarginEvaluator<'a> {
    fn nll(&self) -> f64 {
        self.nll
    }

    fn neg_gradient(&self, k: usize) -> Option<Vec<f64>> {
        let kind = if k == 0 { MarginParamKind::Mu } else { MarginParamKind::Sigma };
        let mut g = Vec::with_capacity(self.y.len());
        for (i, &y) in self.y.iter().enumerate() {
            let dlf = or_nan(self.family.dlogpdf_dparam(y, self.params[i], kind));
            let dresp = if k == 0 {
                self.family.d_response_mu(self.etas[0][i])
            } else {
                self.family.d_response_sigma(self.etas[1][i])
            };
            let v = dlf * dresp;
            if !v.is_finite() {
                return None;
            }
            g.push(v);
        }
        Some(g)
    }

    fn candidate_nll(&self, k: usize, increment: &[f64], s: f64) -> f64 {
        let mut total = 0.0;
        for (i, &y) in self.y.iter().enumerate() {
            let p = if k == 0 {
                MarginParams::new(
                    self.family.response_mu(self.etas[0][i] + s * increment[i]),
                    self.params[i].sigma,
                )
            } else {
                MarginParams::new(
                    self.params[i].mu,
                    self.family.response_sigma(self.etas[1][i] + s * increment[i]),
                )
            };
            total += -or_nan(self.family.log_pdf(y, p));
        }
        total
    }
}

impl Objective for MarginObjective {
    fn n_params(&self) -> usize {
        2
    }

    fn offsets(&self, data: &Dataset, mode: OffsetMode) -> Result<Vec<f64>> {
        match mode {
            OffsetMode::Zero => Ok(vec![0.0; 2]),
            OffsetMode::MaximumLikelihood => {
                let (a, b) = mle::intercept_only_ml(self.family, self.response(data))?;
                Ok(vec![a, b])
            }
        }
    }

    fn nll(&self, etas: &[Vec<f64>], data: &Dataset) -> f64 {
        let y = self.response(data);
        let mut total = 0.0;
        for (i, &v) in y.iter().enumerate() {
            let p = self.family.params_from_eta(etas[0][i], etas[1][i]);
            total += -or_nan(self.family.log_pdf(v, p));
        }
        total
    }

    fn evaluator<'a>(&'a self, etas: &'a [Vec<f64>], data: &'a Dataset)
        -> Box<dyn StepEvaluator + 'a> {
        let y = self.response(data);
        let mut params = Vec::with_capacity(y.len());
        let mut nll = 0.0;
        for (i, &v) in y.iter().enumerate() {
            let p = self.family.params_from_eta(etas[0][i], etas[1][i]);
            nll += -or_nan(self.family.log_pdf(v, p));
            params.push(p);
        }
        Box::new(MarginEvaluator {
            family: self.family,
            y,
            etas,
            params,
            nll,
        })
    }
}

// ---------------------------------------------------------------------------
// Gradient stabilization
// ---------------------------------------------------------------------------

/// Rescales a gradient vector in place. `Mad` divides by the median absolute
/// deviation (floored at 1e-10) so effective step lengths are comparable
/// across parameter dimensions; the rescaling is scale-equivariant and leaves
/// the RSS-selected learner unchanged.
pub fn stabilize(gradient: &mut [f64], mode: Stabilization) {
    match mode {
        Stabilization::None => {}
        Stabilization::Mad => {
            let m = numeric::mad(gradient).max(1e-10);
            for g in gradient.iter_mut() {
                *g /= m;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

pub(crate) fn run_boost(
    objective: &dyn Objective,
    data: &Dataset,
    learners: &LearnerSet,
    config: &BoostConfig,
    validation: Option<&Dataset>,
) -> Result<EngineResult> {
    if !(config.step_length > 0.0 && config.step_length <= 1.0) {
        return Err(Error::Config(format!(
            "step length must lie in (0, 1], got {}",
            config.step_length
        )));
    }
    if learners.learners.len() != data.p() {
        return Err(Error::SchemaMismatch(format!(
            "{} learners for {} covariates",
            learners.learners.len(),
            data.p()
        )));
    }
    if let Some(v) = validation {
        if v.names != data.names {
            return Err(Error::SchemaMismatch(
                "validation covariate schema differs from training".into(),
            ));
        }
    }

    let n = data.n();
    let nk = objective.n_params();
    let s = config.step_length;
    let offsets = objective.offsets(data, config.offsets)?;

    let mut etas: Vec<Vec<f64>> = offsets.iter().map(|&o| vec![o; n]).collect();
    let mut coefficients: Vec<Vec<Option<DVector<f64>>>> =
        (0..nk).map(|_| vec![None; data.p()]).collect();
    let mut val_etas: Option<Vec<Vec<f64>>> =
        validation.map(|v| offsets.iter().map(|&o| vec![o; v.n()]).collect());

    let mut risk_path = Vec::with_capacity(config.m_stop + 1);
    let mut val_path = validation.map(|_| Vec::with_capacity(config.m_stop + 1));
    let mut selection_log = Vec::with_capacity(config.m_stop);

    risk_path.push(objective.nll(&etas, data) / n as f64);
    if let (Some(path), Some(v), Some(ve)) = (val_path.as_mut(), validation, val_etas.as_ref()) {
        path.push(objective.nll(ve, v) / v.n() as f64);
    }

    struct Candidate {
        covariate: usize,
        coefficients: DVector<f64>,
        fitted: Vec<f64>,
        nll: f64,
    }

    for m in 1..=config.m_stop {
        let eval = objective.evaluator(&etas, data);
        let current_nll = eval.nll();

        // Champion per parameter: min-RSS learner fitted to the stabilized
        // negative gradient, then the candidate risk of a step-scaled update.
        let mut candidates: Vec<Option<Candidate>> = Vec::with_capacity(nk);
        for k in 0..nk {
            let Some(mut gradient) = eval.neg_gradient(k) else {
                candidates.push(None);
                continue;
            };
            stabilize(&mut gradient, config.stabilization);

            let best = if learners.learners.len() >= PARALLEL_LEARNER_THRESHOLD {
                let rss: Vec<(usize, f64)> = learners
                    .learners
                    .par_iter()
                    .enumerate()
                    .map(|(j, l)| (j, l.fit_rss(&gradient).1))
                    .collect();
                rss.into_iter()
                    .fold(None::<(usize, f64)>, |acc, (j, r)| match acc {
                        Some((_, br)) if br <= r => acc,
                        _ => Some((j, r)),
                    })
            } else {
                let mut best: Option<(usize, f64)> = None;
                for (j, l) in learners.learners.iter().enumerate() {
                    let (_, r) = l.fit_rss(&gradient);
                    if best.map_or(true, |(_, br)| r < br) {
                        best = Some((j, r));
                    }
                }
                best
            };
            let Some((j_star, _)) = best else {
                candidates.push(None);
                continue;
            };
            let learner = &learners.learners[j_star];
            let (coef, _) = learner.fit_rss(&gradient);
            let fitted = learner.fitted_values(&coef);
            let nll = eval.candidate_nll(k, &fitted, s);
            candidates.push(if nll.is_finite() {
                Some(Candidate {
                    covariate: j_star,
                    coefficients: coef,
                    fitted,
                    nll,
                })
            } else {
                None
            });
        }

        // Across parameters: lowest candidate risk wins; ties break by the
        // fixed parameter order.
        let mut winner: Option<usize> = None;
        for (k, cand) in candidates.iter().enumerate() {
            if let Some(c) = cand {
                if winner.map_or(true, |w| c.nll < candidates[w].as_ref().unwrap().nll) {
                    winner = Some(k);
                }
            }
        }
        let Some(k_star) = winner else {
            return Err(Error::AllCandidatesFailed { iteration: m });
        };
        let cand = candidates.into_iter().nth(k_star).unwrap().unwrap();
        drop(eval);

        if let Some(tol) = config.convergence_tol {
            if (current_nll - cand.nll) / (n as f64) < tol {
                break;
            }
        }

        // Apply the single winning update.
        for (e, f) in etas[k_star].iter_mut().zip(&cand.fitted) {
            *e += s * f;
        }
        let slot = &mut coefficients[k_star][cand.covariate];
        match slot {
            Some(acc) => *acc += &cand.coefficients * s,
            None => *slot = Some(&cand.coefficients * s),
        }
        if let (Some(ve), Some(v)) = (val_etas.as_mut(), validation) {
            let contrib = learners.learners[cand.covariate]
                .predict(&cand.coefficients, &v.covariates[cand.covariate]);
            for (e, c) in ve[k_star].iter_mut().zip(contrib) {
                *e += s * c;
            }
        }

        selection_log.push(SelectionRecord {
            iteration: m,
            param: k_star,
            covariate: cand.covariate,
            loss_reduction: (current_nll - cand.nll) / n as f64,
        });
        risk_path.push(cand.nll / n as f64);
        if let (Some(path), Some(v), Some(ve)) = (val_path.as_mut(), validation, val_etas.as_ref()) {
            path.push(objective.nll(ve, v) / v.n() as f64);
        }
    }

    let states = (0..nk)
        .map(|k| PredictorState {
            param_index: k,
            offset: offsets[k],
            coefficients: std::mem::take(&mut coefficients[k]),
            eta: std::mem::take(&mut etas[k]),
        })
        .collect();
    Ok(EngineResult {
        states,
        selection_log,
        risk_path,
        validation_risk_path: val_path,
    })
}

// ---------------------------------------------------------------------------
// Public fit results
// ---------------------------------------------------------------------------

/// A fitted bivariate copula regression model.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub spec: ModelSpec,
    pub config: BoostConfig,
    pub covariate_names: Vec<String>,
    /// Predictor states in the order mu1, sigma1, mu2, sigma2, theta.
    pub states: Vec<PredictorState>,
    pub selection_log: Vec<SelectionRecord>,
    /// Mean in-sample risk after 0..=iterations updates.
    pub risk_path: Vec<f64>,
    pub validation_risk_path: Option<Vec<f64>>,
    /// Marks a product-copula fit assembled from univariate margin fits.
    pub independence: bool,
    pub learners: Arc<LearnerSet>,
}

/// Per-observation distribution parameters implied by a fit on some data.
#[derive(Debug, Clone)]
pub struct PredictedParams {
    pub p1: Vec<MarginParams>,
    pub p2: Vec<MarginParams>,
    pub theta: Vec<f64>,
}

impl FitResult {
    pub fn iterations(&self) -> usize {
        self.selection_log.len()
    }

    fn check_schema(&self, newdata: &Dataset) -> Result<()> {
        if newdata.names != self.covariate_names {
            return Err(Error::SchemaMismatch(format!(
                "model was trained on covariates {:?}, new data has {:?}",
                self.covariate_names, newdata.names
            )));
        }
        Ok(())
    }

    /// Link-scale predictor values on new data (order mu1, sigma1, mu2,
    /// sigma2, theta).
    pub fn predict_etas(&self, newdata: &Dataset) -> Result<Vec<Vec<f64>>> {
        self.check_schema(newdata)?;
        Ok(self
            .states
            .iter()
            .map(|st| st.predict_eta(&self.learners, &newdata.covariates))
            .collect())
    }

    /// Response-scale distribution parameters on new data.
    pub fn predict_params(&self, newdata: &Dataset) -> Result<PredictedParams> {
        let etas = self.predict_etas(newdata)?;
        let n = newdata.n();
        let mut out = PredictedParams {
            p1: Vec::with_capacity(n),
            p2: Vec::with_capacity(n),
            theta: Vec::with_capacity(n),
        };
        for i in 0..n {
            out.p1.push(self.spec.margin1.params_from_eta(etas[0][i], etas[1][i]));
            out.p2.push(self.spec.margin2.params_from_eta(etas[2][i], etas[3][i]));
            out.theta.push(self.spec.copula.response(etas[4][i]));
        }
        Ok(out)
    }
}

/// A fitted univariate marginal regression (one response, two parameters).
#[derive(Debug, Clone)]
pub struct MarginFitResult {
    pub family: MarginFamily,
    pub which: ResponseIndex,
    pub config: BoostConfig,
    pub covariate_names: Vec<String>,
    /// Predictor states in the order mu, sigma.
    pub states: Vec<PredictorState>,
    pub selection_log: Vec<SelectionRecord>,
    pub risk_path: Vec<f64>,
    pub validation_risk_path: Option<Vec<f64>>,
    pub learners: Arc<LearnerSet>,
}

impl ModelSpec {
    /// Total negative log-likelihood at given link-scale predictors.
    pub fn neg_log_lik(&self, etas: &[Vec<f64>], data: &Dataset) -> Result<f64> {
        check_etas(etas, 5, data.n())?;
        Ok(CopulaObjective { spec: *self }.nll(etas, data))
    }

    /// Per-observation negative gradient of the loss w.r.t. one predictor.
    pub fn negative_gradient(
        &self,
        etas: &[Vec<f64>],
        data: &Dataset,
        param: ModelParam,
    ) -> Result<Vec<f64>> {
        check_etas(etas, 5, data.n())?;
        let objective = CopulaObjective { spec: *self };
        let eval = objective.evaluator(etas, data);
        eval.neg_gradient(param.index()).ok_or_else(|| {
            Error::Domain(format!("non-finite gradient for parameter {}", param.label()))
        })
    }
}

fn check_etas(etas: &[Vec<f64>], expected: usize, n: usize) -> Result<()> {
    if etas.len() != expected {
        return Err(Error::SchemaMismatch(format!(
            "{} predictor vectors supplied, expected {expected}",
            etas.len()
        )));
    }
    for (k, e) in etas.iter().enumerate() {
        if e.len() != n {
            return Err(Error::SchemaMismatch(format!(
                "predictor {k} has {} entries for {n} observations",
                e.len()
            )));
        }
    }
    Ok(())
}

/// Fits a bivariate copula regression model by noncyclic boosting.
pub fn fit(
    spec: &ModelSpec,
    data: &Dataset,
    learners: &Arc<LearnerSet>,
    config: &BoostConfig,
) -> Result<FitResult> {
    fit_with_validation(spec, data, learners, config, None)
}

/// Like [`fit`] but also records the out-of-sample risk path on a held-out
/// dataset after every iteration.
pub fn fit_with_validation(
    spec: &ModelSpec,
    data: &Dataset,
    learners: &Arc<LearnerSet>,
    config: &BoostConfig,
    validation: Option<&Dataset>,
) -> Result<FitResult> {
    let objective = CopulaObjective { spec: *spec };
    let engine = run_boost(&objective, data, learners, config, validation)?;
    Ok(FitResult {
        spec: *spec,
        config: *config,
        covariate_names: data.names.clone(),
        states: engine.states,
        selection_log: engine.selection_log,
        risk_path: engine.risk_path,
        validation_risk_path: engine.validation_risk_path,
        independence: false,
        learners: Arc::clone(learners),
    })
}

/// Fits one marginal distribution to one response by noncyclic boosting over
/// its two parameter predictors.
pub fn fit_margin(
    family: MarginFamily,
    which: ResponseIndex,
    data: &Dataset,
    learners: &Arc<LearnerSet>,
    config: &BoostConfig,
    validation: Option<&Dataset>,
) -> Result<MarginFitResult> {
    let objective = MarginObjective { family, which };
    let engine = run_boost(&objective, data, learners, config, validation)?;
    Ok(MarginFitResult {
        family,
        which,
        config: *config,
        covariate_names: data.names.clone(),
        states: engine.states,
        selection_log: engine.selection_log,
        risk_path: engine.risk_path,
        validation_risk_path: engine.validation_risk_path,
        learners: Arc::clone(learners),
    })
}

/// Assembles an independence (product-copula) model from two univariate
/// marginal fits: the dependence predictor is frozen at the Gaussian
/// independence value, so the joint density factorizes exactly.
pub fn combine_independent(first: &MarginFitResult, second: &MarginFitResult) -> Result<FitResult> {
    if first.which != ResponseIndex::First || second.which != ResponseIndex::Second {
        return Err(Error::Config(
            "combine_independent expects a first-response fit and a second-response fit".into(),
        ));
    }
    if first.covariate_names != second.covariate_names {
        return Err(Error::SchemaMismatch(
            "the two marginal fits use different covariate schemas".into(),
        ));
    }
    let n = first.states[0].eta.len();
    let mut states = Vec::with_capacity(5);
    for st in first.states.iter().chain(second.states.iter()) {
        states.push(st.clone());
    }
    for (k, st) in states.iter_mut().enumerate() {
        st.param_index = k;
    }
    states.push(PredictorState {
        param_index: 4,
        offset: 0.0,
        coefficients: vec![None; first.covariate_names.len()],
        eta: vec![0.0; n],
    });

    let mut selection_log = Vec::new();
    for rec in &first.selection_log {
        selection_log.push(*rec);
    }
    for rec in &second.selection_log {
        selection_log.push(SelectionRecord {
            param: rec.param + 2,
            ..*rec
        });
    }
    selection_log.sort_by_key(|r| r.iteration);

    // Risk paths of the two fits add (the product-copula log c term is zero);
    // paths may have different lengths, so extend the shorter with its last value.
    let len = first.risk_path.len().max(second.risk_path.len());
    let extend = |path: &[f64]| -> Vec<f64> {
        let mut v = path.to_vec();
        let last = *v.last().expect("risk path never empty");
        v.resize(len, last);
        v
    };
    let risk_path: Vec<f64> = extend(&first.risk_path)
        .iter()
        .zip(extend(&second.risk_path))
        .map(|(a, b)| a + b)
        .collect();

    Ok(FitResult {
        spec: ModelSpec {
            margin1: first.family,
            margin2: second.family,
            copula: CopulaFamily::Gaussian,
        },
        config: first.config,
        covariate_names: first.covariate_names.clone(),
        states,
        selection_log,
        risk_path,
        validation_risk_path: None,
        independence: true,
        learners: Arc::clone(&first.learners),
    })
}

//! Base-learners: per-covariate penalized regression units fitted repeatedly
//! to working-gradient vectors inside the boosting loop.
//!
//! Two kinds exist. A linear learner is an unpenalized 2-column fit
//! (intercept and slope). A P-spline learner is a cubic B-spline basis on
//! equidistant knots with a second-order difference penalty, its smoothing
//! parameter calibrated once so the hat-matrix trace equals a target number
//! of degrees of freedom.
//!
//! Knot convention: `n_knots` equidistant knots span the observed covariate
//! range inclusive of both boundaries (so `n_knots - 2` interior knots), and
//! the grid is extended `degree` further knots beyond each boundary with the
//! same spacing. This yields `n_knots + degree - 1` B-spline basis functions
//! (22 for the default 20 knots, cubic). Predictions outside the training
//! range use constant extrapolation at the boundary value.
//!
//! The penalized normal matrix is factorized once per learner at setup; the
//! per-iteration fit is two triangular solves plus sparse products.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Maximum supported spline order (degree + 1) for the fixed-width row storage.
const MAX_ROW_WIDTH: usize = 8;

/// Settings shared by every base-learner in a model.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LearnerConfig {
    /// Equidistant spanning knots, boundaries included.
    pub n_knots: usize,
    /// B-spline degree (cubic by default).
    pub degree: usize,
    /// Order of the difference penalty.
    pub penalty_order: usize,
    /// Hat-matrix trace targeted by the smoothing-parameter calibration.
    pub target_df: f64,
    /// Learner kind for continuous covariates (binary columns are always linear).
    pub kind: LearnerKind,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            n_knots: 20,
            degree: 3,
            penalty_order: 2,
            target_df: 4.0,
            kind: LearnerKind::PSpline,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    Linear,
    PSpline,
}

/// Equidistant B-spline knot grid over a covariate range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnotGrid {
    pub lower: f64,
    pub upper: f64,
    pub n_knots: usize,
    pub degree: usize,
}

impl KnotGrid {
    pub fn new(lower: f64, upper: f64, n_knots: usize, degree: usize) -> Result<Self> {
        if !(upper > lower) || !lower.is_finite() || !upper.is_finite() {
            return Err(Error::Data(format!(
                "degenerate covariate range [{lower}, {upper}] cannot carry a spline basis"
            )));
        }
        if n_knots < 2 {
            return Err(Error::Config(format!("need at least 2 spanning knots, got {n_knots}")));
        }
        if degree < 1 || degree + 1 > MAX_ROW_WIDTH {
            return Err(Error::Config(format!("unsupported spline degree {degree}")));
        }
        Ok(KnotGrid {
            lower,
            upper,
            n_knots,
            degree,
        })
    }

    /// Number of B-spline basis functions on this grid.
    pub fn n_basis(&self) -> usize {
        self.n_knots + self.degree - 1
    }

    fn spacing(&self) -> f64 {
        (self.upper - self.lower) / (self.n_knots - 1) as f64
    }

    /// Knot value at extended index `j` (j = 0 corresponds to `degree` knots
    /// below the lower boundary).
    fn knot(&self, j: usize) -> f64 {
        self.lower + (j as isize - self.degree as isize) as f64 * self.spacing()
    }

    /// Evaluates the `degree + 1` non-zero basis functions at `x` (clamped to
    /// the grid range). Returns the first active basis index and the values.
    pub fn eval(&self, x: f64) -> (usize, [f64; MAX_ROW_WIDTH]) {
        let d = self.degree;
        let x = x.clamp(self.lower, self.upper);
        // span index in the extended knot vector: t[k] <= x < t[k+1]
        let raw = ((x - self.lower) / self.spacing()).floor() as isize + d as isize;
        let k = raw.clamp(d as isize, (self.n_knots + d - 2) as isize) as usize;

        let mut values = [0.0; MAX_ROW_WIDTH];
        let mut left = [0.0; MAX_ROW_WIDTH];
        let mut right = [0.0; MAX_ROW_WIDTH];
        values[0] = 1.0;
        for j in 1..=d {
            left[j] = x - self.knot(k + 1 - j);
            right[j] = self.knot(k + j) - x;
            let mut saved = 0.0;
            for r in 0..j {
                let tmp = values[r] / (right[r + 1] + left[j - r]);
                values[r] = saved + right[r + 1] * tmp;
                saved = left[j - r] * tmp;
            }
            values[j] = saved;
        }
        (k - d, values)
    }
}

/// Row-sparse design matrix: each row has `width` consecutive non-zeros.
#[derive(Debug, Clone)]
struct SparseRows {
    n_cols: usize,
    width: usize,
    offsets: Vec<u32>,
    values: Vec<f64>,
}

impl SparseRows {
    fn n_rows(&self) -> usize {
        self.offsets.len()
    }

    fn xt_v(&self, v: &[f64]) -> DVector<f64> {
        debug_assert_eq!(v.len(), self.n_rows());
        let mut out = DVector::zeros(self.n_cols);
        for (i, &off) in self.offsets.iter().enumerate() {
            let base = i * self.width;
            let o = off as usize;
            for a in 0..self.width {
                out[o + a] += self.values[base + a] * v[i];
            }
        }
        out
    }

    fn x_beta(&self, beta: &DVector<f64>) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_rows());
        for (i, &off) in self.offsets.iter().enumerate() {
            let base = i * self.width;
            let o = off as usize;
            let mut acc = 0.0;
            for a in 0..self.width {
                acc += self.values[base + a] * beta[o + a];
            }
            out.push(acc);
        }
        out
    }

    fn xtx(&self) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.n_cols, self.n_cols);
        for (i, &off) in self.offsets.iter().enumerate() {
            let base = i * self.width;
            let o = off as usize;
            for a in 0..self.width {
                let va = self.values[base + a];
                for b in 0..self.width {
                    g[(o + a, o + b)] += va * self.values[base + b];
                }
            }
        }
        g
    }
}

/// Difference penalty matrix D_k' D_k for `n` coefficients.
pub fn difference_penalty(n: usize, order: usize) -> DMatrix<f64> {
    // Build D by repeated first differencing.
    let mut d = DMatrix::<f64>::identity(n, n);
    for _ in 0..order {
        let rows = d.nrows() - 1;
        let mut next = DMatrix::<f64>::zeros(rows, n);
        for r in 0..rows {
            for c in 0..n {
                next[(r, c)] = d[(r + 1, c)] - d[(r, c)];
            }
        }
        d = next;
    }
    d.transpose() * d
}

/// One fit of a base-learner to a working-residual vector.
#[derive(Debug, Clone)]
pub struct LearnerFit {
    /// Coefficient increment (length = number of basis functions).
    pub coefficients: DVector<f64>,
    /// Fitted values on the training rows.
    pub fitted: Vec<f64>,
    /// Residual sum of squares of the fit.
    pub rss: f64,
}

/// A calibrated, factorized base-learner bound to one covariate.
#[derive(Debug, Clone)]
pub struct BaseLearner {
    pub covariate_index: usize,
    pub kind: LearnerKind,
    pub lambda: f64,
    pub knots: Option<KnotGrid>,
    rows: SparseRows,
    xtx: DMatrix<f64>,
    penalty: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl BaseLearner {
    /// Unpenalized linear learner with an intercept column.
    pub fn linear(covariate_index: usize, x: &[f64]) -> Result<Self> {
        let n = x.len();
        let mut values = Vec::with_capacity(2 * n);
        for &v in x {
            values.push(1.0);
            values.push(v);
        }
        let rows = SparseRows {
            n_cols: 2,
            width: 2,
            offsets: vec![0; n],
            values,
        };
        let xtx = rows.xtx();
        let penalty = DMatrix::zeros(2, 2);
        let chol = Cholesky::new(xtx.clone()).ok_or_else(|| {
            Error::Singular(format!(
                "linear learner on covariate {covariate_index}: design is rank deficient (constant column?)"
            ))
        })?;
        Ok(BaseLearner {
            covariate_index,
            kind: LearnerKind::Linear,
            lambda: 0.0,
            knots: None,
            rows,
            xtx,
            penalty,
            chol,
        })
    }

    /// Cubic P-spline learner; calibrates lambda to `config.target_df`.
    pub fn pspline(covariate_index: usize, x: &[f64], config: &LearnerConfig) -> Result<Self> {
        let lower = x.iter().cloned().fold(f64::INFINITY, f64::min);
        let upper = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let knots = KnotGrid::new(lower, upper, config.n_knots, config.degree)?;
        Self::pspline_on_grid(covariate_index, x, knots, config)
    }

    /// P-spline learner on an explicit knot grid (used when deserializing).
    pub fn pspline_on_grid(
        covariate_index: usize,
        x: &[f64],
        knots: KnotGrid,
        config: &LearnerConfig,
    ) -> Result<Self> {
        let n_basis = knots.n_basis();
        let width = knots.degree + 1;
        let mut offsets = Vec::with_capacity(x.len());
        let mut values = Vec::with_capacity(x.len() * width);
        for &v in x {
            let (off, row) = knots.eval(v);
            offsets.push(off as u32);
            values.extend_from_slice(&row[..width]);
        }
        let rows = SparseRows {
            n_cols: n_basis,
            width,
            offsets,
            values,
        };
        let xtx = rows.xtx();
        let penalty = difference_penalty(n_basis, config.penalty_order);
        let lambda = calibrate_lambda(&xtx, &penalty, config.target_df, config.penalty_order)?;
        let chol = Cholesky::new(&xtx + &penalty * lambda).ok_or_else(|| {
            Error::Singular(format!(
                "penalized normal matrix for covariate {covariate_index} is not positive definite"
            ))
        })?;
        Ok(BaseLearner {
            covariate_index,
            kind: LearnerKind::PSpline,
            lambda,
            knots: Some(knots),
            rows,
            xtx,
            penalty,
            chol,
        })
    }

    pub fn n_basis(&self) -> usize {
        self.rows.n_cols
    }

    /// Penalized least-squares fit of `target` using the factorization cached
    /// at setup. The residual sum of squares is computed directly from the
    /// fitted values.
    pub fn fit_to_residuals(&self, target: &[f64]) -> LearnerFit {
        let xtv = self.rows.xt_v(target);
        let coefficients = self.chol.solve(&xtv);
        let fitted = self.rows.x_beta(&coefficients);
        let mut rss = 0.0;
        for (t, f) in target.iter().zip(&fitted) {
            let r = t - f;
            rss += r * r;
        }
        LearnerFit {
            coefficients,
            fitted,
            rss,
        }
    }

    /// Solve-only variant of [`BaseLearner::fit_to_residuals`] for the
    /// selection scan: the residual sum of squares comes from the Gram
    /// identity ||t||^2 - 2 b'X't + b'X'Xb, so no fitted values are
    /// materialized.
    pub fn fit_rss(&self, target: &[f64]) -> (DVector<f64>, f64) {
        let xtv = self.rows.xt_v(target);
        let coefficients = self.chol.solve(&xtv);
        let tt: f64 = target.iter().map(|t| t * t).sum();
        let bxt = coefficients.dot(&xtv);
        let bgb = (&self.xtx * &coefficients).dot(&coefficients);
        (coefficients, tt - 2.0 * bxt + bgb)
    }

    /// Fitted values of a coefficient vector on the cached training design.
    pub fn fitted_values(&self, coefficients: &DVector<f64>) -> Vec<f64> {
        self.rows.x_beta(coefficients)
    }

    /// Evaluates an accumulated coefficient vector at new covariate values.
    /// P-splines constant-extrapolate outside the training knot range.
    pub fn predict(&self, coefficients: &DVector<f64>, x_new: &[f64]) -> Vec<f64> {
        match self.kind {
            LearnerKind::Linear => x_new
                .iter()
                .map(|&v| coefficients[0] + coefficients[1] * v)
                .collect(),
            LearnerKind::PSpline => {
                let grid = self.knots.as_ref().expect("pspline learner has a knot grid");
                let width = grid.degree + 1;
                x_new
                    .iter()
                    .map(|&v| {
                        let (off, row) = grid.eval(v);
                        let mut acc = 0.0;
                        for a in 0..width {
                            acc += row[a] * coefficients[off + a];
                        }
                        acc
                    })
                    .collect()
            }
        }
    }

    /// Hat-matrix trace tr[(X'X + lambda P)^{-1} X'X] at an arbitrary lambda.
    pub fn hat_trace_at(&self, lambda: f64) -> Result<f64> {
        hat_trace(&self.xtx, &self.penalty, lambda)
    }

    /// Penalized criterion ||t - X b||^2 + lambda b' P b for a coefficient vector.
    pub fn penalized_criterion(&self, target: &[f64], beta: &DVector<f64>) -> f64 {
        let fitted = self.rows.x_beta(beta);
        let mut rss = 0.0;
        for (t, f) in target.iter().zip(&fitted) {
            let r = t - f;
            rss += r * r;
        }
        rss + self.lambda * (beta.transpose() * &self.penalty * beta)[(0, 0)]
    }
}

fn hat_trace(xtx: &DMatrix<f64>, penalty: &DMatrix<f64>, lambda: f64) -> Result<f64> {
    let a = xtx + penalty * lambda;
    let chol = Cholesky::new(a)
        .ok_or_else(|| Error::Singular("normal matrix not positive definite".into()))?;
    let z = chol.solve(xtx);
    Ok(z.trace())
}

/// Finds lambda such that the hat-matrix trace equals `target_df` (within
/// 1e-6), by monotone bisection on log(lambda).
pub fn calibrate_lambda(
    xtx: &DMatrix<f64>,
    penalty: &DMatrix<f64>,
    target_df: f64,
    penalty_order: usize,
) -> Result<f64> {
    const LOG_LO: f64 = -30.0;
    const LOG_HI: f64 = 34.0;
    let df_hi = hat_trace(xtx, penalty, LOG_LO.exp())
        .map_err(|_| Error::Singular("design matrix is rank deficient".into()))?;
    let df_lo = hat_trace(xtx, penalty, LOG_HI.exp())?;
    // As lambda -> inf the trace tends to the penalty null-space dimension.
    if target_df <= penalty_order as f64 || target_df >= df_hi {
        return Err(Error::InfeasibleDf {
            requested: target_df,
            lo: penalty_order as f64,
            hi: df_hi,
        });
    }
    if target_df <= df_lo {
        // Requested df lies between the null-space dimension and the trace at
        // the largest search lambda; the bracket below would not straddle.
        return Err(Error::InfeasibleDf {
            requested: target_df,
            lo: df_lo,
            hi: df_hi,
        });
    }
    let (mut lo, mut hi) = (LOG_LO, LOG_HI);
    let mut mid = 0.0;
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let df = hat_trace(xtx, penalty, mid.exp())?;
        if (df - target_df).abs() < 1e-8 {
            return Ok(mid.exp());
        }
        if df > target_df {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lambda = mid.exp();
    let df = hat_trace(xtx, penalty, lambda)?;
    if (df - target_df).abs() > 1e-6 {
        return Err(Error::Optimization(format!(
            "degrees-of-freedom calibration stalled at trace {df} for target {target_df}"
        )));
    }
    Ok(lambda)
}

/// The per-covariate learners shared by all model parameters of a fit.
///
/// Design matrices and factorizations depend only on the covariate column and
/// the learner settings, so one learner per covariate is built once and read
/// concurrently by every parameter's selection step.
#[derive(Debug, Clone)]
pub struct LearnerSet {
    pub learners: Vec<BaseLearner>,
    pub config: LearnerConfig,
}

impl LearnerSet {
    /// Builds one learner per covariate. Binary 0/1 columns always get linear
    /// learners; other columns follow `config.kind`.
    pub fn build(data: &Dataset, config: &LearnerConfig) -> Result<Self> {
        let mut learners = Vec::with_capacity(data.p());
        for j in 0..data.p() {
            let col = &data.covariates[j];
            let learner = if config.kind == LearnerKind::Linear || data.is_binary(j) {
                BaseLearner::linear(j, col).map_err(|e| {
                    Error::Data(format!("covariate `{}`: {e}", data.names[j]))
                })?
            } else {
                BaseLearner::pspline(j, col, config).map_err(|e| {
                    Error::Data(format!("covariate `{}`: {e}", data.names[j]))
                })?
            };
            learners.push(learner);
        }
        Ok(LearnerSet {
            learners,
            config: *config,
        })
    }
}

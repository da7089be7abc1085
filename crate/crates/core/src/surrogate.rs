//! Linear surrogates: weighted ridge least squares, recovery of primal
//! coefficients from dual ones, and perturbation-based LIME.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::blackbox::Predictor;
use crate::error::{ensure_finite, Error, Result};
use crate::geometry::PointSet;
use crate::rng::StreamRng;

pub const DEFAULT_RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub ridge: f64,
}

impl LinearModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }
}

/// Numerical facts about a least-squares solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitInfo {
    /// Number of singular values kept.
    pub rank: usize,
    /// Weighted residual norm `sqrt(sum w (y - pred)^2)`.
    pub residual: f64,
}

/// Minimizes `||A c - r||^2 + ridge ||c||^2` through the SVD of `A`, with
/// singular values below the usual rank cutoff discarded, so that
/// rank-deficient systems get the minimum-norm solution.
fn ridge_svd_solve(a: DMatrix<f64>, r: &DVector<f64>, ridge: f64) -> (DVector<f64>, usize) {
    let (n, p) = a.shape();
    if n == 0 || p == 0 {
        return (DVector::zeros(p), 0);
    }
    let svd = a.svd(true, true);
    let u = svd.u.as_ref().expect("U requested");
    let vt = svd.v_t.as_ref().expect("V^T requested");
    let s = &svd.singular_values;
    let cutoff = s.max() * (n.max(p) as f64) * f64::EPSILON;
    let mut rank = 0;
    let utr = u.transpose() * r;
    let mut scaled = DVector::zeros(s.len());
    for k in 0..s.len() {
        if s[k] > cutoff && s[k] > 0.0 {
            rank += 1;
            scaled[k] = utr[k] * s[k] / (s[k] * s[k] + ridge);
        }
    }
    (vt.transpose() * scaled, rank)
}

fn validate_weights(weights: Option<&[f64]>, n: usize) -> Result<()> {
    if let Some(w) = weights {
        if w.len() != n {
            return Err(Error::invalid(format!("{} weights for {n} rows", w.len())));
        }
        ensure_finite(w, "weights")?;
        if w.iter().any(|&v| v < 0.0) {
            return Err(Error::invalid("weights must be nonnegative"));
        }
        if w.iter().all(|&v| v == 0.0) {
            return Err(Error::invalid("weights are all zero"));
        }
    }
    Ok(())
}

/// Weighted ridge regression; the intercept, when present, is not
/// penalized.
pub fn fit_linear_with_info(
    inputs: &PointSet,
    targets: &[f64],
    weights: Option<&[f64]>,
    ridge: f64,
    with_intercept: bool,
) -> Result<(LinearModel, FitInfo)> {
    let n = inputs.len();
    let p = inputs.dim();
    if n == 0 {
        return Err(Error::invalid("cannot fit a model to zero rows"));
    }
    if targets.len() != n {
        return Err(Error::invalid(format!("{n} input rows but {} targets", targets.len())));
    }
    ensure_finite(targets, "targets")?;
    validate_weights(weights, n)?;
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return Err(Error::invalid(format!("ridge must be finite and nonnegative, got {ridge}")));
    }
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let (x_mean, y_mean) = if with_intercept {
        let total: f64 = (0..n).map(w).sum();
        let mut xm = vec![0.0; p];
        let mut ym = 0.0;
        for (i, row) in inputs.rows().enumerate() {
            let wi = w(i) / total;
            for (m, v) in xm.iter_mut().zip(row) {
                *m += wi * v;
            }
            ym += wi * targets[i];
        }
        (xm, ym)
    } else {
        (vec![0.0; p], 0.0)
    };
    let a = DMatrix::from_fn(n, p, |i, j| w(i).sqrt() * (inputs.row(i)[j] - x_mean[j]));
    let r = DVector::from_fn(n, |i, _| w(i).sqrt() * (targets[i] - y_mean));
    let (c, rank) = ridge_svd_solve(a.clone(), &r, ridge);
    let residual = (&a * &c - &r).norm();
    let coefficients: Vec<f64> = c.iter().copied().collect();
    let intercept =
        if with_intercept { y_mean - coefficients.iter().zip(&x_mean).map(|(a, b)| a * b).sum::<f64>() } else { 0.0 };
    Ok((LinearModel { coefficients, intercept, ridge }, FitInfo { rank, residual }))
}

pub fn fit_linear(
    inputs: &PointSet,
    targets: &[f64],
    weights: Option<&[f64]>,
    ridge: f64,
    with_intercept: bool,
) -> Result<LinearModel> {
    fit_linear_with_info(inputs, targets, weights, ridge, with_intercept).map(|(m, _)| m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimalRecovery {
    pub a: Vec<f64>,
    pub rank: usize,
    /// `||X a - b||`
    pub residual: f64,
}

/// Primal coefficients `a` with `x*_i . a ~= b_i` for every extreme point
/// (rows of `extremes`).
pub fn recover_primal(b: &[f64], extremes: &PointSet, ridge: f64) -> Result<PrimalRecovery> {
    if extremes.is_empty() {
        return Err(Error::invalid("no extreme points"));
    }
    let (model, info) = fit_linear_with_info(extremes, b, None, ridge, false)?;
    Ok(PrimalRecovery { a: model.coefficients, rank: info.rank, residual: info.residual })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LimeWeighting {
    /// `exp(-||x - x0||^2 / (2 v))`
    Kernel,
    /// Independent `|N(0, v)|` draws, ignoring the distance to `x0`.
    RandomNormal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimeConfig {
    pub n_samples: usize,
    /// Per-feature variance of the Gaussian perturbations.
    pub cov_diag: Vec<f64>,
    pub kernel_width: f64,
    pub weighting: LimeWeighting,
    pub ridge: f64,
}

impl LimeConfig {
    pub fn new(n_samples: usize, variance: f64, dim: usize, kernel_width: f64) -> Self {
        Self {
            n_samples,
            cov_diag: vec![variance; dim],
            kernel_width,
            weighting: LimeWeighting::Kernel,
            ridge: DEFAULT_RIDGE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.cov_diag.len();
        if self.n_samples < m + 1 {
            return Err(Error::Config(format!(
                "LIME needs at least {} samples for {m} features, got {}",
                m + 1,
                self.n_samples
            )));
        }
        if self.cov_diag.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::Config("LIME variances must be positive".into()));
        }
        if !(self.kernel_width > 0.0) || !self.kernel_width.is_finite() {
            return Err(Error::Config(format!("LIME kernel width must be positive, got {}", self.kernel_width)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimeExplanation {
    pub model: LinearModel,
    pub samples: PointSet,
    pub weights: Vec<f64>,
    pub warnings: Vec<String>,
}

const WEIGHT_FLOOR: f64 = 1e-300;

pub fn lime_explain(
    x0: &[f64],
    predictor: &dyn Predictor,
    cfg: &LimeConfig,
    seed: u64,
    stream: u64,
) -> Result<LimeExplanation> {
    cfg.validate()?;
    ensure_finite(x0, "explained point")?;
    if x0.len() != cfg.cov_diag.len() {
        return Err(Error::invalid(format!(
            "explained point has {} features, LIME configured for {}",
            x0.len(),
            cfg.cov_diag.len()
        )));
    }
    let mut rng = StreamRng::new(seed, stream);
    let sd: Vec<f64> = cfg.cov_diag.iter().map(|v| v.sqrt()).collect();
    let mut samples = PointSet::with_dim(x0.len());
    for _ in 0..cfg.n_samples {
        let row: Vec<f64> = x0.iter().zip(&sd).map(|(c, s)| c + s * rng.normal()).collect();
        samples.push(&row)?;
    }
    let z = predictor.predict_batch(&samples)?;
    let mut warnings = Vec::new();
    let mut weights: Vec<f64> = match cfg.weighting {
        LimeWeighting::Kernel => samples
            .rows()
            .map(|r| {
                let d2: f64 = r.iter().zip(x0).map(|(a, b)| (a - b) * (a - b)).sum();
                (-d2 / (2.0 * cfg.kernel_width)).exp()
            })
            .collect(),
        LimeWeighting::RandomNormal => {
            (0..cfg.n_samples).map(|_| (cfg.kernel_width.sqrt() * rng.normal()).abs()).collect()
        }
    };
    if weights.iter().all(|&w| w < WEIGHT_FLOOR) {
        warnings.push(format!(
            "all LIME weights underflowed; floored at {WEIGHT_FLOOR:e} (kernel width {} too small for the perturbation scale)",
            cfg.kernel_width
        ));
    }
    weights.iter_mut().for_each(|w| *w = w.max(WEIGHT_FLOOR));
    // The fit is invariant to a common weight scale except for the ridge
    // term; pin the largest weight to 1 so the ridge means the same thing
    // for every kernel width.
    let wmax = weights.iter().copied().fold(0.0, f64::max);
    weights.iter_mut().for_each(|w| *w /= wmax);
    let model = fit_linear(&samples, &z, Some(&weights), cfg.ridge, true)?;
    Ok(LimeExplanation { model, samples, weights, warnings })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseSummary {
    pub per_point: Vec<f64>,
    pub mean: f64,
}

/// Squared error of each explanation at its own test point, and the mean.
pub fn surrogate_mse(
    test_points: &PointSet,
    predictor: &dyn Predictor,
    explanations: &[LinearModel],
) -> Result<MseSummary> {
    if explanations.len() != test_points.len() {
        return Err(Error::invalid(format!(
            "{} explanations for {} test points",
            explanations.len(),
            test_points.len()
        )));
    }
    let f = predictor.predict_batch(test_points)?;
    let per_point: Vec<f64> =
        test_points.rows().zip(explanations).zip(&f).map(|((x, g), fx)| (fx - g.predict(x)).powi(2)).collect();
    let mean = per_point.iter().sum::<f64>() / per_point.len().max(1) as f64;
    Ok(MseSummary { per_point, mean })
}

//! Feature-based explanation through the dual (simplex) representation of
//! a neighbourhood's convex hull.
//!
//! Local mode: take the `K` nearest training points of `x0` plus `x0`
//! itself, find the extreme points `x*_1..x*_d` of that set, draw `n`
//! uniform simplex vectors `lambda`, query the black box at
//! `sum_i lambda_i x*_i`, fit `z ~ b . lambda` without intercept and map the
//! dual coefficients back with `a = argmin ||X a - b||`. Every query point is
//! a convex combination of real data, so the black box is never asked about
//! regions it was not trained on.

use serde::{Deserialize, Serialize};

use crate::blackbox::{nearest_indices, Predictor};
use crate::error::{ensure_finite, Error, Result};
use crate::geometry::{find_extreme_points, PointSet, Polytope};
use crate::simplex::{map_all, SimplexSampler};
use crate::surrogate::{fit_linear_with_info, recover_primal, LinearModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualConfig {
    pub k: usize,
    pub n_lambda: usize,
    /// Geometry tolerance; `None` uses `1e-8 (1 + extent)` of the hull
    /// candidates.
    pub tol: Option<f64>,
    /// Tikhonov term for both least-squares stages. The default 0 still
    /// yields the minimum-norm solution on rank-deficient designs; any
    /// positive value shrinks `b` by roughly `ridge / s_min^2`.
    pub ridge: f64,
    pub seed: u64,
    pub stream: u64,
}

impl Default for DualConfig {
    fn default() -> Self {
        Self { k: 10, n_lambda: 30, tol: None, ridge: 0.0, seed: 0, stream: 0 }
    }
}

impl DualConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("K must be at least 1".into()));
        }
        if self.n_lambda < 2 {
            return Err(Error::Config(format!("n_lambda must be at least 2, got {}", self.n_lambda)));
        }
        if let Some(t) = self.tol {
            if !(t > 0.0) {
                return Err(Error::Config(format!("tolerance must be positive, got {t}")));
            }
        }
        if !(self.ridge >= 0.0) {
            return Err(Error::Config(format!("ridge must be nonnegative, got {}", self.ridge)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub d: usize,
    /// `None` in global mode.
    pub contains_x0: Option<bool>,
    /// Residual norm of the dual fit.
    pub fit_residual: f64,
    /// Residual norm of `X a - b`.
    pub recovery_residual: f64,
    pub primal_rank: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualExplanation {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub poly: Polytope,
    /// Training-row indices of the hull candidates (without `x0`).
    pub neighbors: Vec<usize>,
    pub lambdas: PointSet,
    pub primal: PointSet,
    pub z: Vec<f64>,
    pub diagnostics: Diagnostics,
}

impl DualExplanation {
    /// The primal surrogate `g(x) = a . x`.
    pub fn surrogate(&self) -> LinearModel {
        LinearModel { coefficients: self.a.clone(), intercept: 0.0, ridge: self.poly.tol() }
    }
}

fn explain_candidates(
    candidates: PointSet,
    neighbors: Vec<usize>,
    x0_index: Option<usize>,
    predictor: &dyn Predictor,
    cfg: &DualConfig,
) -> Result<DualExplanation> {
    let tol = cfg.tol.unwrap_or_else(|| candidates.default_tol());
    let mut poly = find_extreme_points(&candidates, tol)?;
    if let Some(i) = x0_index {
        poly = poly.mark_explained_point(i);
    }
    let d = poly.d();
    if cfg.n_lambda < d {
        return Err(Error::Config(format!(
            "n_lambda = {} is smaller than the number of extreme points d = {d}; \
             increase --n-lambda or decrease --K",
            cfg.n_lambda
        )));
    }
    let lambdas = SimplexSampler::new(d, cfg.seed, cfg.stream)?.sample(cfg.n_lambda)?;
    let primal = map_all(&lambdas, poly.extremes())?;
    let z = predictor.predict_batch(&primal)?;
    if z.len() != primal.len() {
        return Err(Error::PredictorIo(format!("predictor returned {} values for {} queries", z.len(), primal.len())));
    }
    ensure_finite(&z, "black-box predictions")?;
    let (dual, info) = fit_linear_with_info(&lambdas, &z, None, cfg.ridge, false)?;
    let recovery = recover_primal(&dual.coefficients, poly.extremes(), cfg.ridge)?;
    let m = candidates.dim();
    let mut warnings = Vec::new();
    if recovery.rank < m {
        warnings.push(format!(
            "extreme points span only {} of {m} dimensions; a is the minimum-norm solution",
            recovery.rank
        ));
    }
    Ok(DualExplanation {
        a: recovery.a,
        b: dual.coefficients,
        diagnostics: Diagnostics {
            d,
            contains_x0: x0_index.map(|_| poly.contains_x0()),
            fit_residual: info.residual,
            recovery_residual: recovery.residual,
            primal_rank: recovery.rank,
            warnings,
        },
        poly,
        neighbors,
        lambdas,
        primal,
        z,
    })
}

pub fn explain_local(
    x0: &[f64],
    train: &PointSet,
    predictor: &dyn Predictor,
    cfg: &DualConfig,
) -> Result<DualExplanation> {
    cfg.validate()?;
    ensure_finite(x0, "explained point")?;
    if x0.len() != train.dim() {
        return Err(Error::invalid(format!(
            "explained point has {} features, training data has {}",
            x0.len(),
            train.dim()
        )));
    }
    if train.len() < cfg.k {
        return Err(Error::Config(format!("K = {} exceeds the {} training rows", cfg.k, train.len())));
    }
    let neighbors = nearest_indices(train, x0, cfg.k);
    let mut candidates = train.select(&neighbors);
    candidates.push(x0)?;
    explain_candidates(candidates, neighbors, Some(cfg.k), predictor, cfg)
}

pub fn explain_global(train: &PointSet, predictor: &dyn Predictor, cfg: &DualConfig) -> Result<DualExplanation> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let all: Vec<usize> = (0..train.len()).collect();
    explain_candidates(train.clone(), all, None, predictor, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImportanceMode {
    Signed,
    Normalized,
}

/// `a` itself, or `|a_i| / sum |a_j|`. An all-zero `a` normalizes to the
/// uniform vector and yields a warning.
pub fn feature_importance(a: &[f64], mode: ImportanceMode) -> (Vec<f64>, Option<String>) {
    match mode {
        ImportanceMode::Signed => (a.to_vec(), None),
        ImportanceMode::Normalized => {
            let s: f64 = a.iter().map(|v| v.abs()).sum();
            if s == 0.0 {
                let m = a.len().max(1) as f64;
                (vec![1.0 / m; a.len()], Some("all coefficients are zero; importances set to uniform".into()))
            } else {
                (a.iter().map(|v| v.abs() / s).collect(), None)
            }
        }
    }
}

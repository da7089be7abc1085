//! Predictors that explanations are computed against.

mod analytic;
mod external;
mod knn;
mod trees;

use serde::{Deserialize, Serialize};

pub use analytic::{analytic, AnalyticFn, AnalyticPredictor};
pub use external::{external_predictor, ExternalPredictor, DEFAULT_TIMEOUT};
pub use knn::{knn_fit, nearest_indices, KnnRegressor};
pub use trees::{trees_fit, trees_fit_with, BaggedTrees, TreeOptions};

use crate::error::{Error, Result};
use crate::geometry::PointSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictorKind {
    Knn,
    BaggedTrees,
    Analytic,
    External,
}

pub trait Predictor: Send + Sync {
    fn kind(&self) -> PredictorKind;

    /// Expected input dimension, when the predictor knows it.
    fn input_dim(&self) -> Option<usize>;

    fn predict_batch(&self, x: &PointSet) -> Result<Vec<f64>>;

    fn predict(&self, x: &[f64]) -> Result<f64> {
        let set = PointSet::from_flat(x.len(), x.to_vec())?;
        Ok(self.predict_batch(&set)?[0])
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::invalid(format!("predictor expects {expected} features, got {got}")));
    }
    Ok(())
}

pub(crate) fn check_training(x: &PointSet, y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!("{} training rows but {} targets", x.len(), y.len())));
    }
    crate::error::ensure_finite(y, "training targets")
}

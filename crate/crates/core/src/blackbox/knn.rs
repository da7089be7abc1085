use super::{check_dim, check_training, Predictor, PredictorKind};
use crate::error::{Error, Result};
use crate::geometry::PointSet;

/// Brute-force k-nearest-neighbour regressor (Euclidean, unweighted mean).
#[derive(Debug, Clone)]
pub struct KnnRegressor {
    k: usize,
    train_x: PointSet,
    train_y: Vec<f64>,
}

pub fn knn_fit(train_x: &PointSet, train_y: &[f64], k: usize) -> Result<KnnRegressor> {
    check_training(train_x, train_y)?;
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if k > train_x.len() {
        return Err(Error::invalid(format!("k = {k} exceeds the {} training rows", train_x.len())));
    }
    Ok(KnnRegressor { k, train_x: train_x.clone(), train_y: train_y.to_vec() })
}

/// Indices of the `k` rows of `set` closest to `q`, nearest first; equal
/// distances are ordered by index.
pub fn nearest_indices(set: &PointSet, q: &[f64], k: usize) -> Vec<usize> {
    let mut cand: Vec<(f64, usize)> =
        set.rows().enumerate().map(|(i, r)| (r.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum(), i)).collect();
    let by = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < cand.len() {
        cand.select_nth_unstable_by(k, by);
        cand.truncate(k);
    }
    cand.sort_by(by);
    cand.into_iter().map(|(_, i)| i).collect()
}

impl KnnRegressor {
    pub fn k(&self) -> usize {
        self.k
    }

    fn predict_one(&self, q: &[f64]) -> f64 {
        let idx = nearest_indices(&self.train_x, q, self.k);
        idx.iter().map(|&i| self.train_y[i]).sum::<f64>() / self.k as f64
    }
}

impl Predictor for KnnRegressor {
    fn kind(&self) -> PredictorKind {
        PredictorKind::Knn
    }

    fn input_dim(&self) -> Option<usize> {
        Some(self.train_x.dim())
    }

    fn predict_batch(&self, x: &PointSet) -> Result<Vec<f64>> {
        check_dim(self.train_x.dim(), x.dim())?;
        Ok(x.rows().map(|r| self.predict_one(r)).collect())
    }
}

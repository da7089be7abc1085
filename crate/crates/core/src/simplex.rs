//! Uniform sampling on the unit simplex and the map back to primal space.

use crate::error::{Error, Result};
use crate::geometry::{PointSet, Polytope};
use crate::rng::StreamRng;

/// Draws i.i.d. uniform vectors on the `(d-1)`-simplex as normalized
/// exponential spacings.
#[derive(Debug, Clone)]
pub struct SimplexSampler {
    d: usize,
    seed: u64,
    stream_id: u64,
    rng: StreamRng,
}

impl SimplexSampler {
    pub fn new(d: usize, seed: u64, stream_id: u64) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("simplex dimension d must be at least 1"));
        }
        Ok(Self { d, seed, stream_id, rng: StreamRng::new(seed, stream_id) })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn next_lambda(&mut self) -> Vec<f64> {
        if self.d == 1 {
            return vec![1.0];
        }
        let mut v: Vec<f64> = (0..self.d).map(|_| self.rng.exp1()).collect();
        let s: f64 = v.iter().sum();
        v.iter_mut().for_each(|x| *x /= s);
        v
    }

    /// `n` samples as the rows of an `n x d` matrix.
    pub fn sample(&mut self, n: usize) -> Result<PointSet> {
        if n == 0 {
            return Err(Error::invalid("sample count must be at least 1"));
        }
        let mut data = Vec::with_capacity(n * self.d);
        for _ in 0..n {
            data.extend(self.next_lambda());
        }
        PointSet::from_flat(self.d, data)
    }
}

/// `sum_i lambda_i x*_i` over the rows of `extremes`.
pub fn combine_rows(lambda: &[f64], extremes: &PointSet) -> Result<Vec<f64>> {
    if lambda.len() != extremes.len() {
        return Err(Error::invalid(format!(
            "lambda has {} entries but there are {} extreme points",
            lambda.len(),
            extremes.len()
        )));
    }
    let mut x = vec![0.0; extremes.dim()];
    for (l, row) in lambda.iter().zip(extremes.rows()) {
        for (xi, r) in x.iter_mut().zip(row) {
            *xi += l * r;
        }
    }
    Ok(x)
}

pub fn map_to_primal(lambda: &[f64], poly: &Polytope) -> Result<Vec<f64>> {
    combine_rows(lambda, poly.extremes())
}

/// Maps every row of `lambdas` to primal space.
pub fn map_all(lambdas: &PointSet, extremes: &PointSet) -> Result<PointSet> {
    let mut out = PointSet::with_dim(extremes.dim());
    for l in lambdas.rows() {
        out.push(&combine_rows(l, extremes)?)?;
    }
    Ok(out)
}

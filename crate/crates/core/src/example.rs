//! Example-based explanation in dual coordinates: which extreme points
//! (training examples) drive a prediction, measured by normalized dual
//! coefficients, accumulated local effects over `lambda_k`, linear
//! coefficients, or the shape functions of an additive network.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PointSet;
use crate::nam::AdditiveNet;
use crate::simplex::combine_rows;
use crate::surrogate::fit_linear;

/// `v_i = b_i / sum_j b_j`. Entries may be negative; they always sum to 1.
pub fn contribution_weights(b: &[f64]) -> Result<Vec<f64>> {
    let s: f64 = b.iter().sum();
    let scale: f64 = b.iter().map(|v| v.abs()).sum();
    if b.is_empty() || s == 0.0 || s.abs() <= 1e-12 * scale {
        return Err(Error::DegenerateNormalization(s));
    }
    Ok(b.iter().map(|v| v / s).collect())
}

/// `sum_i v_i x*_i`.
pub fn explaining_instance(v: &[f64], extremes: &PointSet) -> Result<Vec<f64>> {
    combine_rows(v, extremes)
}

/// Sample standard deviation (`r - 1` denominator).
pub fn deviation_importance(values: &[f64]) -> Result<f64> {
    let r = values.len();
    if r < 2 {
        return Err(Error::invalid(format!("deviation importance needs at least 2 values, got {r}")));
    }
    let mean = values.iter().sum::<f64>() / r as f64;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    Ok((ss / (r - 1) as f64).sqrt())
}

/// How the probed coordinate is moved to a bin edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AleProbe {
    /// Replace `lambda_k` and leave the other coordinates alone (standard
    /// ALE; probes leave the simplex).
    Independent,
    /// Replace `lambda_k` and rescale the others by
    /// `(1 - new) / (1 - old)` so the probe stays on the simplex; uniform
    /// redistribution when `old = 1`.
    Renormalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AleCurve {
    pub coord: usize,
    pub bin_edges: Vec<f64>,
    /// One value per bin (mean of the accumulated effect at its two edges),
    /// shifted to zero sample-weighted mean.
    pub centered_effects: Vec<f64>,
    pub counts: Vec<usize>,
    pub warnings: Vec<String>,
}

impl AleCurve {
    pub fn bin_centers(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }
}

/// Linear-interpolation quantile (the common "type 7" definition).
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn assign_bins(values: &[f64], edges: &[f64]) -> Vec<usize> {
    let nb = edges.len() - 1;
    values.iter().map(|&v| edges.partition_point(|&e| e <= v).saturating_sub(1).min(nb - 1)).collect()
}

fn probe(lambda: &[f64], k: usize, value: f64, mode: AleProbe) -> Vec<f64> {
    let mut out = lambda.to_vec();
    out[k] = value;
    if mode == AleProbe::Renormalized && lambda.len() > 1 {
        let old = lambda[k];
        let rest = 1.0 - value;
        if old < 1.0 {
            let scale = rest / (1.0 - old);
            for (j, o) in out.iter_mut().enumerate() {
                if j != k {
                    *o = lambda[j] * scale;
                }
            }
        } else {
            let share = rest / (lambda.len() - 1) as f64;
            for (j, o) in out.iter_mut().enumerate() {
                if j != k {
                    *o = share;
                }
            }
        }
    }
    out
}

/// First-order accumulated local effect of coordinate `coord` of `f` over
/// the sample `lambdas`, on `r_bins` quantile bins. Bins holding fewer than
/// two samples are merged into a neighbour.
pub fn ale_curve(
    lambdas: &PointSet,
    coord: usize,
    r_bins: usize,
    f: &dyn Fn(&PointSet) -> Result<Vec<f64>>,
    mode: AleProbe,
) -> Result<AleCurve> {
    let n = lambdas.len();
    if coord >= lambdas.dim() {
        return Err(Error::invalid(format!("coordinate {coord} out of range for dimension {}", lambdas.dim())));
    }
    if n < 2 || r_bins == 0 {
        return Err(Error::invalid("ALE needs at least 2 samples and 1 bin"));
    }
    let values = lambdas.column(coord);
    let mut sorted = values.clone();
    sorted.sort_by(f64::total_cmp);
    let mut edges: Vec<f64> = (0..=r_bins).map(|i| quantile_sorted(&sorted, i as f64 / r_bins as f64)).collect();
    edges.dedup();
    if edges.len() < 2 {
        return Ok(AleCurve {
            coord,
            bin_edges: vec![sorted[0], sorted[0]],
            centered_effects: vec![0.0],
            counts: vec![n],
            warnings: vec![format!("coordinate {} is constant across samples; ALE curve is flat", coord + 1)],
        });
    }
    // merge sparse bins by dropping the edge they share with a neighbour
    loop {
        let bins = assign_bins(&values, &edges);
        let mut counts = vec![0usize; edges.len() - 1];
        bins.iter().for_each(|&b| counts[b] += 1);
        match counts.iter().position(|&c| c < 2) {
            Some(j) if counts.len() > 1 => {
                let drop = if j + 1 < counts.len() { j + 1 } else { j };
                edges.remove(drop);
            }
            _ => break,
        }
    }
    let bins = assign_bins(&values, &edges);
    let nb = edges.len() - 1;
    let mut counts = vec![0usize; nb];
    bins.iter().for_each(|&b| counts[b] += 1);

    let mut probes = PointSet::with_dim(lambdas.dim());
    for (l, &b) in lambdas.rows().zip(&bins) {
        probes.push(&probe(l, coord, edges[b + 1], mode))?;
        probes.push(&probe(l, coord, edges[b], mode))?;
    }
    let out = f(&probes)?;
    if out.len() != probes.len() {
        return Err(Error::PredictorIo(format!("black box returned {} values for {} probes", out.len(), probes.len())));
    }
    let mut sums = vec![0.0; nb];
    for (i, &b) in bins.iter().enumerate() {
        sums[b] += out[2 * i] - out[2 * i + 1];
    }
    let mut acc = vec![0.0; nb + 1];
    for j in 0..nb {
        let local = if counts[j] > 0 { sums[j] / counts[j] as f64 } else { 0.0 };
        acc[j + 1] = acc[j] + local;
    }
    let raw: Vec<f64> = (0..nb).map(|j| 0.5 * (acc[j] + acc[j + 1])).collect();
    let mean = raw.iter().zip(&counts).map(|(v, &c)| v * c as f64).sum::<f64>() / n as f64;
    Ok(AleCurve {
        coord,
        bin_edges: edges,
        centered_effects: raw.iter().map(|v| v - mean).collect(),
        counts,
        warnings: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ImportanceMethod {
    Ale,
    Lr,
    Nam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleImportance {
    pub method: ImportanceMethod,
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
    pub warnings: Vec<String>,
}

fn finish(method: ImportanceMethod, raw: Vec<f64>, mut warnings: Vec<String>) -> ExampleImportance {
    let s: f64 = raw.iter().sum();
    let normalized = if s > 0.0 {
        raw.iter().map(|v| v / s).collect()
    } else {
        warnings.push(format!("{method:?} importances are all zero; reporting uniform values"));
        vec![1.0 / raw.len() as f64; raw.len()]
    };
    ExampleImportance { method, raw, normalized, warnings }
}

pub const DEFAULT_ALE_BINS: usize = 20;

/// Deviation importance of each coordinate's ALE curve (over bin values).
pub fn ale_importance(
    lambdas: &PointSet,
    f: &dyn Fn(&PointSet) -> Result<Vec<f64>>,
    r_bins: usize,
    mode: AleProbe,
) -> Result<(ExampleImportance, Vec<AleCurve>)> {
    let mut raw = Vec::new();
    let mut warnings = Vec::new();
    let mut curves = Vec::new();
    for k in 0..lambdas.dim() {
        let c = ale_curve(lambdas, k, r_bins, f, mode)?;
        raw.push(if c.centered_effects.len() >= 2 { deviation_importance(&c.centered_effects)? } else { 0.0 });
        warnings.extend(c.warnings.iter().cloned());
        curves.push(c);
    }
    Ok((finish(ImportanceMethod::Ale, raw, warnings), curves))
}

/// Deviation importance of `b_k lambda_k` over the samples, with `b` the
/// no-intercept least-squares fit of `z` on `lambda`. Returns `b` too.
pub fn lr_importance(lambdas: &PointSet, z: &[f64], ridge: f64) -> Result<(ExampleImportance, Vec<f64>)> {
    let b = fit_linear(lambdas, z, None, ridge, false)?.coefficients;
    let mut raw = Vec::with_capacity(b.len());
    for (k, bk) in b.iter().enumerate() {
        let vals: Vec<f64> = lambdas.rows().map(|l| bk * l[k]).collect();
        raw.push(deviation_importance(&vals)?);
    }
    Ok((finish(ImportanceMethod::Lr, raw, Vec::new()), b))
}

/// Deviation importance of each shape function over the samples, after
/// the gauge fix of [`crate::nam::gauge_slope`].
pub fn nam_importance(net: &AdditiveNet, lambdas: &PointSet) -> Result<ExampleImportance> {
    let shapes = net.shape_values(lambdas)?;
    let c = crate::nam::gauge_slope(&shapes, lambdas);
    let mut raw = Vec::with_capacity(shapes.len());
    for (k, h) in shapes.iter().enumerate() {
        let vals: Vec<f64> = h.iter().zip(lambdas.rows()).map(|(v, l)| v + c * l[k]).collect();
        raw.push(deviation_importance(&vals)?);
    }
    Ok(finish(ImportanceMethod::Nam, raw, Vec::new()))
}
